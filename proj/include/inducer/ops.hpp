#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "inducer/tensor.hpp"

// Differentiable primitives. Every op computes its result eagerly and, when a
// tape is active and some input requires a gradient, records itself on it.
namespace inducer {

/// Logit value used for disallowed attention positions.
inline constexpr double kMaskedLogit = -1e30;

/// Boolean attendability pattern for an attention logit matrix.
class Mask {
public:
    Mask(std::size_t rows, std::size_t cols);

    /// Causal pattern over `n` real positions preceded by `leading` columns
    /// that every row may attend (prefix slots or an inducer column).
    static Mask causal(std::size_t n, std::size_t leading = 0);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool allowed(std::size_t r, std::size_t c) const { return allowed_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool on) { allowed_[r * cols_ + c] = on ? 1 : 0; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::uint8_t> allowed_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double c);
/// a + 1·biasᵀ; the only broadcast supported.
Tensor add_row(const Tensor& a, const Tensor& bias);
/// diag(s)·a for a matrix a and a vector s with one entry per row.
Tensor row_scale(const Tensor& a, const Tensor& s);
/// Row-wise inner products of two equally shaped matrices.
Tensor row_dot(const Tensor& a, const Tensor& b);
Tensor row_sum(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);

/// Replaces disallowed positions with kMaskedLogit.
Tensor apply_mask(const Tensor& logits, const Mask& mask);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Mean negative log-likelihood over all rows.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> targets);
/// Mean over rows whose mask entry is nonzero.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> targets, std::span<const std::uint8_t> mask);

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t width);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor reshape(const Tensor& a, Shape shape);

/// Gathers rows of `table` by index.
Tensor embedding(const Tensor& table, std::span<const int> ids);

Tensor sum(const Tensor& a);

}  // namespace inducer
