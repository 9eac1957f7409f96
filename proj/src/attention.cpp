#include "inducer/attention.hpp"

#include <cmath>
#include <string>

namespace inducer {

void AttentionWeights::validate() const
{
    const std::size_t d = wq.defined() ? wq.rows() : 0;
    if (d == 0 || num_heads == 0 || d % num_heads != 0) {
        throw ShapeError("attention: model dim " + std::to_string(d) + " not divisible into " +
                         std::to_string(num_heads) + " heads");
    }
    for (const Tensor* w : {&wq, &wk, &wv, &wo}) {
        if (!w->defined() || w->shape() != Shape{d, d}) throw ShapeError("attention: weights must be d x d");
    }
    for (const Tensor* b : {&bq, &bk, &bv, &bo}) {
        if (!b->defined() || b->shape() != Shape{d}) throw ShapeError("attention: biases must have length d");
    }
}

AttentionIntermediates qkv_project(const Tensor& x, const AttentionWeights& w)
{
    w.validate();
    if (x.rank() != 2 || x.cols() != w.model_dim()) {
        throw ShapeError("qkv_project: input " + shape_to_string(x.shape()) + " for model dim " +
                         std::to_string(w.model_dim()));
    }
    AttentionIntermediates out;
    out.q = add_row(matmul(x, w.wq), w.bq);
    out.k = add_row(matmul(x, w.wk), w.bk);
    out.v = add_row(matmul(x, w.wv), w.bv);
    return out;
}

void kernel_statistics(AttentionIntermediates& inter, std::size_t num_heads)
{
    const std::size_t n = inter.q.rows();
    const std::size_t p = inter.q.cols() / num_heads;
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));
    inter.kernel.clear();
    inter.row_sums.clear();
    for (std::size_t h = 0; h < num_heads; ++h) {
        Tensor m(Shape{n, n});
        Tensor dsum(Shape{n});
        auto md = m.mutable_data();
        auto dd = dsum.mutable_data();
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (inter.mask && !inter.mask->allowed(i, j)) continue;
                double dot = 0.0;
                for (std::size_t c = 0; c < p; ++c) dot += inter.q.at(i, h * p + c) * inter.k.at(j, h * p + c);
                md[i * n + j] = std::exp(dot * inv_sqrt_p);
                total += md[i * n + j];
            }
            dd[i] = total;
        }
        inter.kernel.push_back(m);
        inter.row_sums.push_back(dsum);
    }
}

Tensor head_block(const Tensor& m, std::size_t head, std::size_t head_dim)
{
    return slice_cols(m, head * head_dim, head_dim);
}

Tensor output_block(const Tensor& wo, std::size_t head, std::size_t head_dim)
{
    return slice_rows(wo, head * head_dim, head_dim);
}

Tensor attention_weights(const Tensor& q, const Tensor& k, const Mask* mask)
{
    if (q.rank() != 2 || k.rank() != 2 || q.cols() != k.cols()) {
        throw ShapeError("attention: query " + shape_to_string(q.shape()) + " and key " + shape_to_string(k.shape()) +
                         " widths differ");
    }
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor logits = scale(matmul_nt(q, k), inv_sqrt_p);
    if (mask) logits = apply_mask(logits, *mask);
    return softmax_rows(logits);
}

Tensor head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask)
{
    if (!q.defined() || !k.defined() || !v.defined()) throw ShapeError("head_attention: undefined input");
    if (k.rows() != v.rows()) {
        throw ShapeError("head_attention: " + std::to_string(k.rows()) + " keys but " + std::to_string(v.rows()) +
                         " values");
    }
    return matmul(attention_weights(q, k, mask), v);
}

Tensor attention_from_projections(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionWeights& w,
                                  const Mask* mask)
{
    const std::size_t p = w.head_dim();
    std::vector<Tensor> heads;
    heads.reserve(w.num_heads);
    for (std::size_t h = 0; h < w.num_heads; ++h) {
        heads.push_back(head_attention(head_block(q, h, p), head_block(k, h, p), head_block(v, h, p), mask));
    }
    Tensor concat = w.num_heads == 1 ? heads.front() : concat_cols(heads);
    return add_row(matmul(concat, w.wo), w.bo);
}

Tensor attention_sublayer(const Tensor& x, const AttentionWeights& w, const Mask* mask)
{
    const auto inter = qkv_project(x, w);
    return attention_from_projections(inter.q, inter.k, inter.v, w, mask);
}

Tensor complete_head_output(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& wo_block,
                            const Mask* mask)
{
    if (wo_block.rank() != 2 || wo_block.rows() != v.cols()) {
        throw ShapeError("complete_head_output: output block " + shape_to_string(wo_block.shape()) +
                         " does not follow values " + shape_to_string(v.shape()));
    }
    return matmul(head_attention(q, k, v, mask), wo_block);
}

KernelView kernel_estimate(const Tensor& q, const Tensor& k, const Tensor& c)
{
    if (q.rank() != 2 || k.rank() != 2 || c.rank() != 2 || q.cols() != k.cols() || k.rows() != c.rows()) {
        throw ShapeError("kernel_estimate: incompatible shapes " + shape_to_string(q.shape()) + ", " +
                         shape_to_string(k.shape()) + ", " + shape_to_string(c.shape()));
    }
    const std::size_t n = q.rows(), m = k.rows(), p = q.cols(), w = c.cols();
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));
    KernelView view{Tensor(Shape{n, m}), Tensor(Shape{n, m}), Tensor(Shape{n, w})};
    auto kd = view.kernel.mutable_data();
    auto ld = view.weights.mutable_data();
    auto ed = view.estimate.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < p; ++t) dot += q.at(i, t) * k.at(j, t);
            kd[i * m + j] = std::exp(dot * inv_sqrt_p);
            row_sum += kd[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) {
            ld[i * m + j] = kd[i * m + j] / row_sum;
            for (std::size_t t = 0; t < w; ++t) ed[i * w + t] += ld[i * m + j] * c.at(j, t);
        }
    }
    return view;
}

}  // namespace inducer
