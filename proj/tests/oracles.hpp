#pragma once

// Reference computations used by the tests. Written with plain loops over
// nested vectors and long double accumulation, sharing no code with the
// library kernels they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "inducer/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat from(const inducer::Tensor& t)
{
    Mat m(t.rows(), Vec(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.data()[i * t.cols() + j];
    return m;
}

inline Vec vec(const inducer::Tensor& t)
{
    return {t.data().begin(), t.data().end()};
}

inline double max_diff(const Mat& a, const inducer::Tensor& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            m = std::max(m, std::abs(a[i][j] - b.data()[i * b.cols() + j]));
    return m;
}

inline Mat matmul(const Mat& a, const Mat& b)
{
    Mat c(a.size(), Vec(b.empty() ? 0 : b[0].size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < c[i].size(); ++j) {
            long double s = 0;
            for (std::size_t k = 0; k < b.size(); ++k) s += static_cast<long double>(a[i][k]) * b[k][j];
            c[i][j] = static_cast<double>(s);
        }
    return c;
}

inline Mat add_bias(Mat m, const Vec& b)
{
    for (auto& row : m)
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    return m;
}

inline Mat block_cols(const Mat& m, std::size_t begin, std::size_t width)
{
    Mat out;
    for (const auto& row : m) out.emplace_back(row.begin() + begin, row.begin() + begin + width);
    return out;
}

inline Mat block_rows(const Mat& m, std::size_t begin, std::size_t count)
{
    return {m.begin() + begin, m.begin() + begin + count};
}

inline double dot(const Vec& a, const Vec& b)
{
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

/// Weighted average of `values` under exp(logit) weights, with the logits'
/// maximum factored out.
inline Vec weighted(const Vec& logits, const std::vector<const Vec*>& values)
{
    long double top = logits[0];
    for (double z : logits) top = std::max<long double>(top, z);
    std::vector<long double> w(logits.size());
    long double total = 0;
    for (std::size_t j = 0; j < logits.size(); ++j) total += w[j] = std::exp(static_cast<long double>(logits[j]) - top);
    Vec out(values[0]->size(), 0.0);
    for (std::size_t c = 0; c < out.size(); ++c) {
        long double s = 0;
        for (std::size_t j = 0; j < logits.size(); ++j) s += w[j] * (*values[j])[c];
        out[c] = static_cast<double>(s / total);
    }
    return out;
}

/// One attention row over optional always-visible extra slots followed by the
/// real keys (positions j <= i only when causal).
inline Vec attend_row(const Vec& q, const Mat& extra_k, const Mat& extra_v, const Mat& k, const Mat& v,
                      std::size_t i, bool causal)
{
    const double s = 1.0 / std::sqrt(static_cast<double>(q.size()));
    Vec logits;
    std::vector<const Vec*> vals;
    for (std::size_t j = 0; j < extra_k.size(); ++j) {
        logits.push_back(dot(q, extra_k[j]) * s);
        vals.push_back(&extra_v[j]);
    }
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (causal && j > i) break;
        logits.push_back(dot(q, k[j]) * s);
        vals.push_back(&v[j]);
    }
    return weighted(logits, vals);
}

inline Mat attention(const Mat& q, const Mat& k, const Mat& v, bool causal)
{
    Mat out;
    for (std::size_t i = 0; i < q.size(); ++i) out.push_back(attend_row(q[i], {}, {}, k, v, i, causal));
    return out;
}

/// D⁻¹ M C with M_ij = exp(<Q_i, K_j>/√p), evaluated literally.
inline Mat kernel_regression(const Mat& q, const Mat& k, const Mat& c)
{
    const double s = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
    Mat out(q.size(), Vec(c[0].size()));
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<long double> m(k.size());
        long double d = 0;
        for (std::size_t j = 0; j < k.size(); ++j) d += m[j] = std::exp(static_cast<long double>(dot(q[i], k[j]) * s));
        for (std::size_t col = 0; col < c[0].size(); ++col) {
            long double acc = 0;
            for (std::size_t j = 0; j < k.size(); ++j) acc += m[j] * c[j][col];
            out[i][col] = static_cast<double>(acc / d);
        }
    }
    return out;
}

/// relu(x W1 + b1) W2 + b2 for one row.
inline Vec two_layer(const Vec& x, const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2)
{
    Vec h(b1);
    for (std::size_t r = 0; r < h.size(); ++r) {
        long double s = h[r];
        for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<long double>(x[i]) * w1[i][r];
        h[r] = std::max(0.0, static_cast<double>(s));
    }
    Vec y(b2);
    for (std::size_t c = 0; c < y.size(); ++c) {
        long double s = y[c];
        for (std::size_t r = 0; r < h.size(); ++r) s += static_cast<long double>(h[r]) * w2[r][c];
        y[c] = static_cast<double>(s);
    }
    return y;
}

inline inducer::Tensor random_tensor(inducer::Shape shape, std::mt19937_64& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    inducer::Tensor t(std::move(shape));
    for (auto& v : t.mutable_data()) v = u(rng);
    return t;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Element counts of the GPT-2-style backbone, tensor by tensor.
struct BaseCounts {
    std::size_t embeddings, per_layer, total;
};

inline BaseCounts base_counts(std::size_t layers, std::size_t d, std::size_t ff, std::size_t vocab, std::size_t ctx)
{
    const std::size_t attn = 4 * d * d + 4 * d;
    const std::size_t ffn = d * ff + ff + ff * d + d;
    const std::size_t norms = 2 * (2 * d);
    const std::size_t per_layer = attn + ffn + norms;
    const std::size_t embeddings = vocab * d + ctx * d;
    return {embeddings, per_layer, embeddings + layers * per_layer};
}

/// Added parameters per layer for each mechanism.
inline std::size_t prefix_added(std::size_t l, std::size_t d) { return 2 * l * d; }
inline std::size_t lora_added(std::size_t r, std::size_t d, std::size_t targets) { return targets * 2 * r * d; }
inline std::size_t adapter_added(std::size_t r, std::size_t d) { return 2 * r * d; }
inline std::size_t key_mlp_added(std::size_t heads, std::size_t p, std::size_t r)
{
    return heads * (p * r + r + r * p) + p;
}
inline std::size_t value_mlp_added(std::size_t heads, std::size_t p, std::size_t r, std::size_t width)
{
    return heads * (p * r + r + r * width) + width;
}

}  // namespace oracle
