#include "inducer/peft.hpp"

#include <cmath>
#include <string>

namespace inducer {

namespace {

// Extends an n×n mask with `leading` always-attendable columns.
Mask with_leading(const Mask& mask, std::size_t leading)
{
    Mask out(mask.rows(), mask.cols() + leading);
    for (std::size_t i = 0; i < mask.rows(); ++i)
        for (std::size_t j = 0; j < mask.cols(); ++j) out.set(i, leading + j, mask.allowed(i, j));
    return out;
}

Tensor one_minus(const Tensor& t)
{
    return add_scalar(scale(t, -1.0), 1.0);
}

Tensor head_mlp(const Tensor& q, const HeadMLP& mlp, const Tensor& shared_bias)
{
    return add_row(matmul(relu(add_row(matmul(q, mlp.w1), mlp.b1)), mlp.w2), shared_bias);
}

enum class ValueForm { Residual, Gated };

struct FamilyLayout {
    ValueForm form;
    bool extended;
};

// Shared body of inducer-tuning and its ablation variants.
Tensor inducer_family(const Tensor& x, const AttentionWeights& w, const InducerParams& ip, const LoRAParams* lp,
                      const Mask* mask, FamilyLayout layout, InducerForwardTrace* trace)
{
    w.validate();
    const std::size_t heads = w.num_heads;
    const std::size_t p = w.head_dim();
    if (ip.value_mlp.size() != heads || (ip.has_key_mlp() && ip.key_mlp.size() != heads)) {
        throw ConfigError("inducer parameters cover " + std::to_string(ip.value_mlp.size()) + " heads, model has " +
                          std::to_string(heads));
    }
    if (ip.extended != layout.extended) {
        throw ConfigError(layout.extended ? "value MLP must be extended to model dimension"
                                          : "value MLP must stay in head dimension");
    }

    AttentionWeights eff = w;
    if (lp) eff.wq = lora_apply(w.wq, *lp);
    const auto inter = qkv_project(x, eff);
    if (trace) {
        trace->q = inter.q;
        trace->k = inter.k;
        trace->v = inter.v;
        trace->heads.clear();
    }

    std::vector<Tensor> gates;
    std::vector<Tensor> residuals;
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = head_block(inter.q, h, p);
        const Tensor kh = head_block(inter.k, h, p);
        const Tensor pk = inducer_keys(qh, ip, h);
        const Tensor gate = inducer_gate(qh, pk, kh, mask);
        const Tensor residual = mlp_v_bar(qh, ip, h);
        if (trace) trace->heads.push_back({pk, row_dot(qh, pk), gate, residual});
        gates.push_back(gate);
        residuals.push_back(residual);
    }

    if (layout.form == ValueForm::Gated) {
        Tensor out;
        for (std::size_t h = 0; h < heads; ++h) {
            const Tensor fbar = complete_head_output(head_block(inter.q, h, p), head_block(inter.k, h, p),
                                                     head_block(inter.v, h, p), output_block(w.wo, h, p), mask);
            Tensor term = add(row_scale(fbar, one_minus(gates[h])), row_scale(residuals[h], gates[h]));
            out = out.defined() ? add(out, term) : term;
        }
        return add_row(out, w.bo);
    }

    // f̄ summed over heads is the ordinary sub-layer output.
    Tensor out = attention_from_projections(inter.q, inter.k, inter.v, w, mask);
    if (layout.extended) {
        for (std::size_t h = 0; h < heads; ++h) out = add(out, row_scale(residuals[h], gates[h]));
        return out;
    }
    std::vector<Tensor> scaled;
    for (std::size_t h = 0; h < heads; ++h) scaled.push_back(row_scale(residuals[h], gates[h]));
    return add(out, matmul(heads == 1 ? scaled.front() : concat_cols(scaled), w.wo));
}

}  // namespace

PrefixParams PrefixParams::head(std::size_t h, std::size_t head_dim) const
{
    if (length() == 0) return {};
    return {head_block(keys, h, head_dim), head_block(values, h, head_dim)};
}

Tensor ffn_adapter(const Tensor& h, const FFNAdapterParams& ap)
{
    if (h.rank() != 2 || ap.w1.rows() != h.cols() || ap.w2.cols() != h.cols() || ap.w1.cols() != ap.w2.rows()) {
        throw ShapeError("ffn_adapter: hidden " + shape_to_string(h.shape()) + " with W1 " +
                         shape_to_string(ap.w1.shape()) + ", W2 " + shape_to_string(ap.w2.shape()));
    }
    return add(h, matmul(relu(matmul(h, ap.w1)), ap.w2));
}

Tensor prefix_attention(const Tensor& q, const Tensor& k, const Tensor& v, const PrefixParams& pp, const Mask* mask)
{
    const std::size_t l = pp.length();
    if (l == 0) return head_attention(q, k, v, mask);
    if (pp.values.rows() != l || pp.keys.cols() != k.cols() || pp.values.cols() != v.cols()) {
        throw ShapeError("prefix_attention: prefix " + shape_to_string(pp.keys.shape()) + "/" +
                         shape_to_string(pp.values.shape()) + " for keys " + shape_to_string(k.shape()));
    }
    const Tensor keys[] = {pp.keys, k};
    const Tensor values[] = {pp.values, v};
    if (!mask) return head_attention(q, concat_rows(keys), concat_rows(values));
    const Mask full = with_leading(*mask, l);
    return head_attention(q, concat_rows(keys), concat_rows(values), &full);
}

Tensor prefix_mass(const Tensor& q, const Tensor& k, const PrefixParams& pp, const Mask* mask)
{
    const std::size_t l = pp.length();
    if (l == 0) return Tensor(Shape{q.rows()});
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    const Tensor parts[] = {matmul_nt(q, pp.keys), matmul_nt(q, k)};
    Tensor logits = scale(concat_cols(parts), inv_sqrt_p);
    if (mask) logits = apply_mask(logits, with_leading(*mask, l));
    return row_sum(slice_cols(softmax_rows(logits), 0, l));
}

Tensor prefix_as_weighted_sum(const Tensor& q, const Tensor& k, const Tensor& v, const PrefixParams& pp,
                              const Mask* mask)
{
    const Tensor base = head_attention(q, k, v, mask);
    if (pp.length() == 0) return base;
    const Tensor virtual_part = head_attention(q, pp.keys, pp.values);
    const Tensor mu = prefix_mass(q, k, pp, mask);
    return add(row_scale(base, one_minus(mu)), row_scale(virtual_part, mu));
}

Tensor lora_apply(const Tensor& w, const LoRAParams& lp)
{
    if (w.rank() != 2 || lp.b.rows() != w.rows() || lp.a.cols() != w.cols() || lp.b.cols() != lp.a.rows()) {
        throw ShapeError("lora_apply: W " + shape_to_string(w.shape()) + " with B " + shape_to_string(lp.b.shape()) +
                         ", A " + shape_to_string(lp.a.shape()));
    }
    if (lp.rank() > std::min(w.rows(), w.cols())) {
        throw ShapeError("lora_apply: rank " + std::to_string(lp.rank()) + " exceeds " + shape_to_string(w.shape()));
    }
    return add(w, matmul(lp.b, lp.a));
}

Tensor inducer_keys(const Tensor& q_head, const InducerParams& ip, std::size_t head)
{
    if (!ip.has_key_mlp()) return q_head;
    const auto& mlp = ip.key_mlp.at(head);
    if (mlp.w1.rows() != q_head.cols() || mlp.w2.cols() != q_head.cols()) {
        throw ShapeError("inducer_keys: key MLP " + shape_to_string(mlp.w1.shape()) + "/" +
                         shape_to_string(mlp.w2.shape()) + " for queries " + shape_to_string(q_head.shape()));
    }
    return add(q_head, head_mlp(q_head, mlp, ip.key_bias));
}

Tensor inducer_gate(const Tensor& q_head, const Tensor& p_k, const Tensor& k_head, const Mask* mask)
{
    const std::size_t n = q_head.rows();
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(q_head.cols()));
    const Tensor parts[] = {reshape(row_dot(q_head, p_k), Shape{n, 1}), matmul_nt(q_head, k_head)};
    Tensor logits = scale(concat_cols(parts), inv_sqrt_p);
    if (mask) logits = apply_mask(logits, with_leading(*mask, 1));
    return reshape(slice_cols(softmax_rows(logits), 0, 1), Shape{n});
}

Tensor mlp_v_bar(const Tensor& q_head, const InducerParams& ip, std::size_t head)
{
    const auto& mlp = ip.value_mlp.at(head);
    if (mlp.w1.rows() != q_head.cols() || mlp.w2.cols() != ip.value_bias.numel()) {
        throw ShapeError("mlp_v_bar: value MLP " + shape_to_string(mlp.w1.shape()) + "/" +
                         shape_to_string(mlp.w2.shape()) + " for queries " + shape_to_string(q_head.shape()));
    }
    return head_mlp(q_head, mlp, ip.value_bias);
}

Tensor inducer_attention(const Tensor& x, const AttentionWeights& w, const InducerParams& ip, const LoRAParams* lp,
                         const Mask* mask, InducerForwardTrace* trace)
{
    if (!ip.has_key_mlp()) throw ConfigError("inducer_attention: key MLP required");
    return inducer_family(x, w, ip, lp, mask, {ValueForm::Residual, true}, trace);
}

Tensor variant_attention(ModeKind variant, const Tensor& x, const AttentionWeights& w, const InducerParams& ip,
                         const Mask* mask, InducerForwardTrace* trace)
{
    switch (variant) {
    case ModeKind::VariantAdaptive:
        if (ip.has_key_mlp()) throw ConfigError("adaptive variant takes the query as inducer key; no key MLP");
        return inducer_family(x, w, ip, nullptr, mask, {ValueForm::Residual, false}, trace);
    case ModeKind::VariantExtension:
        if (ip.has_key_mlp()) throw ConfigError("extension variant takes the query as inducer key; no key MLP");
        return inducer_family(x, w, ip, nullptr, mask, {ValueForm::Residual, true}, trace);
    case ModeKind::VariantGating:
        if (!ip.has_key_mlp()) throw ConfigError("gating variant needs a key MLP");
        return inducer_family(x, w, ip, nullptr, mask, {ValueForm::Gated, true}, trace);
    default:
        throw ConfigError("variant_attention: '" + std::string(mode_kind_name(variant)) + "' is not an ablation variant");
    }
}

}  // namespace inducer
