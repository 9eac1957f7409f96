#pragma once

// Reference constructions for the tuning mechanisms, built from the plain
// loops in oracles.hpp.

#include "inducer/peft.hpp"
#include "oracles.hpp"

namespace oracle {

using inducer::AttentionWeights;
using inducer::HeadMLP;
using inducer::InducerParams;
using inducer::Tensor;

inline AttentionWeights random_weights(std::size_t heads, std::size_t p, std::mt19937_64& rng)
{
    const std::size_t d = heads * p;
    auto m = [&] { return random_tensor({d, d}, rng, 0.5); };
    auto b = [&] { return random_tensor({d}, rng, 0.2); };
    return {m(), m(), m(), m(), b(), b(), b(), b(), heads};
}

inline HeadMLP random_mlp(std::size_t in, std::size_t r, std::size_t out, std::mt19937_64& rng)
{
    return {random_tensor({in, r}, rng, 0.5), random_tensor({r}, rng, 0.3),
            random_tensor({r, out}, rng, 0.5)};
}

inline InducerParams random_inducer(std::size_t heads, std::size_t p, std::size_t rk, std::size_t rv, bool extended,
                             std::mt19937_64& rng)
{
    InducerParams ip;
    ip.extended = extended;
    const std::size_t width = extended ? heads * p : p;
    for (std::size_t h = 0; h < heads && rk; ++h) ip.key_mlp.push_back(random_mlp(p, rk, p, rng));
    if (rk) ip.key_bias = random_tensor({p}, rng, 0.3);
    for (std::size_t h = 0; h < heads; ++h) ip.value_mlp.push_back(random_mlp(p, rv, width, rng));
    ip.value_bias = random_tensor({width}, rng, 0.3);
    return ip;
}

inline Vec add_vec(Vec a, const Vec& b)
{
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec mlp_row(const Vec& q, const HeadMLP& m, const Tensor& bias)
{
    return two_layer(q, from(m.w1), vec(m.b1), from(m.w2), vec(bias));
}

struct Projections {
    Mat q, k, v;
};

inline Projections project(const Tensor& x, const AttentionWeights& w, const Mat& wq)
{
    const Mat xm = from(x);
    return {add_bias(matmul(xm, wq), vec(w.bq)),
            add_bias(matmul(xm, from(w.wk)), vec(w.bk)),
            add_bias(matmul(xm, from(w.wv)), vec(w.bv))};
}

// Per-row prepend construction: every query attends over its own inducer
// slot followed by the real keys, with values folded through W_o.
inline Mat inducer_prepend_oracle(const Tensor& x, const AttentionWeights& w, const InducerParams& ip, const Mat& wq,
                           bool causal)
{
    const std::size_t heads = w.num_heads, p = w.head_dim(), n = x.rows(), d = heads * p;
    const auto pr = project(x, w, wq);
    const Mat wo = from(w.wo);
    Mat out(n, vec(w.bo));
    for (std::size_t h = 0; h < heads; ++h) {
        const Mat q = block_cols(pr.q, h * p, p), k = block_cols(pr.k, h * p, p);
        const Mat vw = matmul(block_cols(pr.v, h * p, p), block_rows(wo, h * p, p));
        for (std::size_t i = 0; i < n; ++i) {
            const Vec fbar = attend_row(q[i], {}, {}, k, vw, i, causal);
            Vec pk = q[i];
            if (ip.has_key_mlp()) pk = add_vec(pk, mlp_row(q[i], ip.key_mlp[h], ip.key_bias));
            const Vec pv = add_vec(fbar, mlp_row(q[i], ip.value_mlp[h], ip.value_bias));
            const Vec row = attend_row(q[i], {pk}, {pv}, k, vw, i, causal);
            for (std::size_t c = 0; c < d; ++c) out[i][c] += row[c];
        }
    }
    return out;
}

}  // namespace oracle
