#pragma once

#include <vector>

#include "inducer/attention.hpp"
#include "inducer/tuning_mode.hpp"

namespace inducer {

/// Bottlenecked residual MLP h + ReLU(h W₁) W₂; W₂ starts at zero.
struct FFNAdapterParams {
    Tensor w1;  // d×r
    Tensor w2;  // r×d
};

/// Shared virtual tokens of one layer, l×d, sliced into l×p per head.
/// Undefined tensors mean l = 0.
struct PrefixParams {
    Tensor keys;
    Tensor values;

    std::size_t length() const { return keys.defined() ? keys.rows() : 0; }
    PrefixParams head(std::size_t h, std::size_t head_dim) const;
};

/// Low-rank update W + B A with B zero at initialisation.
struct LoRAParams {
    Tensor a;  // r×d
    Tensor b;  // d×r

    std::size_t rank() const { return a.rows(); }
};

/// One head's two-layer MLP: σ(Q W₁ + 1 b₁ᵀ) W₂. The second-layer bias is
/// shared across heads and stored on InducerParams.
struct HeadMLP {
    Tensor w1;  // p×r
    Tensor b1;  // r
    Tensor w2;  // r×out
};

struct InducerParams {
    std::vector<HeadMLP> key_mlp;  // empty: the inducer key is the query itself
    Tensor key_bias;               // p, shared
    std::vector<HeadMLP> value_mlp;
    Tensor value_bias;             // d when extended, p otherwise; shared
    /// Value residual lives in model dimension with the W_o block folded in.
    bool extended = true;

    bool has_key_mlp() const { return !key_mlp.empty(); }
};

struct InducerHeadTrace {
    Tensor inducer_keys;    // P_k, n×p
    Tensor gate_logits;     // a_i = ⟨Q_i, P_k,i⟩
    Tensor gate;            // λ, n
    Tensor value_residual;  // n×d (or n×p for the unextended variant)
};

struct InducerForwardTrace {
    Tensor q, k, v;
    std::vector<InducerHeadTrace> heads;
};

Tensor ffn_adapter(const Tensor& h, const FFNAdapterParams& ap);

/// head_attention over [P_k; K] and [P_v; V]. Prefix columns are never
/// masked; `mask` covers the real n×n positions only.
Tensor prefix_attention(const Tensor& q, const Tensor& k, const Tensor& v, const PrefixParams& pp,
                        const Mask* mask = nullptr);
/// Same output written as (1-μ_i) Attn(Q_i, K, V) + μ_i Attn(Q_i, P_k, P_v),
/// μ_i the softmax mass on the prefix slots.
Tensor prefix_as_weighted_sum(const Tensor& q, const Tensor& k, const Tensor& v, const PrefixParams& pp,
                              const Mask* mask = nullptr);
/// Per-row prefix mass μ.
Tensor prefix_mass(const Tensor& q, const Tensor& k, const PrefixParams& pp, const Mask* mask = nullptr);

/// W + B A. W is not modified.
Tensor lora_apply(const Tensor& w, const LoRAParams& lp);

/// P_k = Q + MLP_k(Q), row by row.
Tensor inducer_keys(const Tensor& q_head, const InducerParams& ip, std::size_t head);
/// λ_i = first column of softmax([a, Q Kᵀ]/√p), with a_i = ⟨Q_i, P_k,i⟩.
Tensor inducer_gate(const Tensor& q_head, const Tensor& p_k, const Tensor& k_head, const Mask* mask = nullptr);
/// σ(Q W₁ + 1 b₁ᵀ) W₂ + 1 b₂ᵀ for head h with the shared b₂.
Tensor mlp_v_bar(const Tensor& q_head, const InducerParams& ip, std::size_t head);

/// Inducer-tuning attention sub-layer: optional LoRA on W_q, then
/// f̄(Q) + Σ_h diag(λ⁽ʰ⁾) MLP̄_v⁽ʰ⁾(Q⁽ʰ⁾) + 1 b_oᵀ.
Tensor inducer_attention(const Tensor& x, const AttentionWeights& w, const InducerParams& ip, const LoRAParams* lp,
                         const Mask* mask = nullptr, InducerForwardTrace* trace = nullptr);

/// Ablation variants (Adaptive, Extension, Gating). Throws ConfigError when
/// `ip` does not have the structure the variant needs.
Tensor variant_attention(ModeKind variant, const Tensor& x, const AttentionWeights& w, const InducerParams& ip,
                         const Mask* mask = nullptr, InducerForwardTrace* trace = nullptr);

}  // namespace inducer
