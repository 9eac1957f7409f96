#pragma once

#include <optional>
#include <vector>

#include "inducer/ops.hpp"
#include "inducer/tensor.hpp"

namespace inducer {

/// Projection weights of one self-attention sub-layer. Head h owns columns
/// [h·p, (h+1)·p) of the q/k/v weights and the same row block of `wo`.
struct AttentionWeights {
    Tensor wq, wk, wv, wo;  // d×d
    Tensor bq, bk, bv, bo;  // d
    std::size_t num_heads = 1;

    std::size_t model_dim() const { return wq.rows(); }
    std::size_t head_dim() const { return model_dim() / num_heads; }
    void validate() const;
};

struct AttentionIntermediates {
    Tensor q, k, v;
    /// Filled by kernel_statistics: M⁽ʰ⁾ = exp(Q⁽ʰ⁾K⁽ʰ⁾ᵀ/√p) with masked entries at
    /// exactly zero, and D⁽ʰ⁾ its row sums.
    std::vector<Tensor> kernel;
    std::vector<Tensor> row_sums;
    std::optional<Mask> mask;
};

AttentionIntermediates qkv_project(const Tensor& x, const AttentionWeights& w);
void kernel_statistics(AttentionIntermediates& inter, std::size_t num_heads);

Tensor head_block(const Tensor& m, std::size_t head, std::size_t head_dim);
Tensor output_block(const Tensor& wo, std::size_t head, std::size_t head_dim);

/// softmax(Q Kᵀ/√p)·V with disallowed logits replaced before the softmax.
Tensor head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask = nullptr);
/// Attention weights alone, rows summing to one.
Tensor attention_weights(const Tensor& q, const Tensor& k, const Mask* mask = nullptr);

/// Concatenated heads times W_o plus b_o, from already projected Q, K, V.
Tensor attention_from_projections(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionWeights& w,
                                  const Mask* mask);
Tensor attention_sublayer(const Tensor& x, const AttentionWeights& w, const Mask* mask = nullptr);

/// One head's share of the sub-layer output with W_o⁽ʰ⁾ folded into the values.
Tensor complete_head_output(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& wo_block,
                            const Mask* mask = nullptr);

/// Nadaraya–Watson estimate with κ(x, y) = exp(⟨x, y⟩/√p).
struct KernelView {
    Tensor kernel;   // M, n×n
    Tensor weights;  // ℓ_j(Q_i) = M_ij / D_ii
    Tensor estimate; // D⁻¹ M C
};

/// Computed directly from the kernel definition without the tape or any max
/// shift, so it stays independent of softmax_rows.
KernelView kernel_estimate(const Tensor& q, const Tensor& k, const Tensor& c);

}  // namespace inducer
