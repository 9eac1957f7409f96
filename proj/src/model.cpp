#include "inducer/model.hpp"

#include <algorithm>
#include <random>

namespace inducer {

namespace {

constexpr double kBaseStd = 0.02;
constexpr double kAddedRange = 0.02;

std::string layer_prefix(std::size_t i)
{
    return "layer" + std::to_string(i) + ".";
}

void push(std::vector<ParamSpec>& out, std::string name, Shape shape, ParamRole role, InitKind init)
{
    out.push_back({std::move(name), std::move(shape), role, init});
}

void add_head_mlps(std::vector<ParamSpec>& out, const std::string& base, std::size_t heads, std::size_t in,
                   std::size_t bottleneck, std::size_t width)
{
    for (std::size_t h = 0; h < heads; ++h) {
        const std::string head = base + "head" + std::to_string(h) + ".";
        push(out, head + "w1", {in, bottleneck}, ParamRole::Added, InitKind::Uniform);
        push(out, head + "b1", {bottleneck}, ParamRole::Added, InitKind::Zeros);
        push(out, head + "w2", {bottleneck, width}, ParamRole::Added, InitKind::Zeros);
    }
    push(out, base + "b2", {width}, ParamRole::Added, InitKind::Zeros);
}

void fill(Tensor& t, InitKind init, std::mt19937_64& rng)
{
    auto data = t.mutable_data();
    switch (init) {
    case InitKind::Zeros: std::fill(data.begin(), data.end(), 0.0); break;
    case InitKind::Ones: std::fill(data.begin(), data.end(), 1.0); break;
    case InitKind::Normal: {
        std::normal_distribution<double> dist(0.0, kBaseStd);
        for (auto& v : data) v = dist(rng);
        break;
    }
    case InitKind::Uniform: {
        std::uniform_real_distribution<double> dist(-kAddedRange, kAddedRange);
        for (auto& v : data) v = dist(rng);
        break;
    }
    }
}

std::vector<HeadMLP> head_mlps(const ParameterStore& store, const std::string& base, std::size_t heads)
{
    std::vector<HeadMLP> out;
    for (std::size_t h = 0; h < heads; ++h) {
        const std::string head = base + "head" + std::to_string(h) + ".";
        out.push_back({store.get(head + "w1"), store.get(head + "b1"), store.get(head + "w2")});
    }
    return out;
}

}  // namespace

ModelConfig ModelConfig::from_preset(std::string_view name)
{
    ModelConfig cfg;
    if (name == "gpt2-small") {
        cfg.layers = 12;
        cfg.heads = 12;
        cfg.head_dim = 64;
        cfg.ffn_dim = 3072;
        cfg.vocab = 50257;
        cfg.context = 1024;
    } else if (name == "toy") {
        cfg.layers = 2;
        cfg.heads = 2;
        cfg.head_dim = 8;
        cfg.ffn_dim = 0;
        cfg.vocab = 32;
        cfg.context = 64;
    } else {
        throw ConfigError("unknown model preset '" + std::string(name) + "'; valid presets: gpt2-small, toy");
    }
    cfg.preset = std::string(name);
    return cfg;
}

void ModelConfig::validate() const
{
    if (layers == 0 || heads == 0 || head_dim == 0 || vocab == 0 || context == 0) {
        throw ConfigError("model config: layers, heads, head_dim, vocab and context must be positive");
    }
}

bool operator==(const ModelConfig& a, const ModelConfig& b)
{
    return a.preset == b.preset && a.layers == b.layers && a.heads == b.heads && a.head_dim == b.head_dim &&
           a.ffn() == b.ffn() && a.vocab == b.vocab && a.context == b.context;
}

std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg, const TuningMode& mode)
{
    cfg.validate();
    mode.validate();
    const std::size_t d = cfg.model_dim(), p = cfg.head_dim, ff = cfg.ffn();
    std::vector<ParamSpec> out;
    push(out, "embed.token", {cfg.vocab, d}, ParamRole::Base, InitKind::Normal);
    push(out, "embed.position", {cfg.context, d}, ParamRole::Base, InitKind::Normal);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string l = layer_prefix(i);
        for (const char* role : {"q", "k", "v", "o"}) {
            push(out, l + "attn.w" + role, {d, d}, ParamRole::Base, InitKind::Normal);
            push(out, l + "attn.b" + role, {d}, ParamRole::Base, InitKind::Zeros);
        }
        push(out, l + "ln1.gain", {d}, ParamRole::Base, InitKind::Ones);
        push(out, l + "ln1.bias", {d}, ParamRole::Base, InitKind::Zeros);
        push(out, l + "ffn.w_in", {d, ff}, ParamRole::Base, InitKind::Normal);
        push(out, l + "ffn.b_in", {ff}, ParamRole::Base, InitKind::Zeros);
        push(out, l + "ffn.w_out", {ff, d}, ParamRole::Base, InitKind::Normal);
        push(out, l + "ffn.b_out", {d}, ParamRole::Base, InitKind::Zeros);
        push(out, l + "ln2.gain", {d}, ParamRole::Base, InitKind::Ones);
        push(out, l + "ln2.bias", {d}, ParamRole::Base, InitKind::Zeros);

        if (mode.has_lora_q()) {
            push(out, l + "lora_q.a", {*mode.lora_rank, d}, ParamRole::Added, InitKind::Uniform);
            push(out, l + "lora_q.b", {d, *mode.lora_rank}, ParamRole::Added, InitKind::Zeros);
        }
        if (mode.has_lora_v()) {
            push(out, l + "lora_v.a", {*mode.lora_rank, d}, ParamRole::Added, InitKind::Uniform);
            push(out, l + "lora_v.b", {d, *mode.lora_rank}, ParamRole::Added, InitKind::Zeros);
        }
        if (mode.has_prefix()) {
            push(out, l + "prefix.keys", {*mode.prefix_length, d}, ParamRole::Added, InitKind::Uniform);
            push(out, l + "prefix.values", {*mode.prefix_length, d}, ParamRole::Added, InitKind::Uniform);
        }
        if (mode.has_inducer()) {
            if (mode.key_bottleneck) add_head_mlps(out, l + "inducer.key.", cfg.heads, p, *mode.key_bottleneck, p);
            add_head_mlps(out, l + "inducer.value.", cfg.heads, p, *mode.value_bottleneck,
                          mode.extended_values() ? d : p);
        }
        if (mode.has_ffn_adapter()) {
            push(out, l + "adapter.w1", {d, *mode.adapter_bottleneck}, ParamRole::Added, InitKind::Uniform);
            push(out, l + "adapter.w2", {*mode.adapter_bottleneck, d}, ParamRole::Added, InitKind::Zeros);
        }
    }
    return out;
}

ParamReport count_params(std::span<const ParamSpec> layout, const TuningMode& mode)
{
    ParamReport r;
    std::size_t added = 0;
    for (const auto& spec : layout) {
        const std::size_t n = shape_numel(spec.shape);
        (spec.role == ParamRole::Base ? r.base_total : added) += n;
    }
    r.total = r.base_total + added;
    const bool full = mode.kind == ModeKind::FullFineTune;
    r.trainable = full ? r.total : added;
    r.storable = r.trainable;
    r.trainable_pct = 100.0 * static_cast<double>(r.trainable) / static_cast<double>(r.base_total);
    r.storable_pct = 100.0 * static_cast<double>(r.storable) / static_cast<double>(r.base_total);
    return r;
}

void ParameterStore::add(std::string name, Tensor tensor, ParamRole role, bool frozen)
{
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(!frozen);
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(tensor), role, frozen});
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const
{
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
    return entries_[it->second];
}

const Tensor& ParameterStore::get(const std::string& name) const
{
    return entry(name).tensor;
}

void ParameterStore::set_frozen(const std::string& name, bool frozen)
{
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
    auto& e = entries_[it->second];
    e.frozen = frozen;
    e.tensor.set_requires_grad(!frozen);
}

std::vector<std::string> ParameterStore::names() const
{
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

std::vector<std::string> ParameterStore::trainable_names() const
{
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (!e.frozen) out.push_back(e.name);
    return out;
}

std::vector<Tensor> ParameterStore::trainable() const
{
    std::vector<Tensor> out;
    for (const auto& e : entries_)
        if (!e.frozen) out.push_back(e.tensor);
    return out;
}

void ParameterStore::zero_grads()
{
    for (auto& e : entries_) e.tensor.zero_grad();
}

Model::Model(ModelConfig config, TuningMode mode, std::uint64_t seed)
    : config_(std::move(config)), mode_(std::move(mode)), seed_(seed)
{
    const auto layout = parameter_layout(config_, mode_);
    std::seed_seq base_seq{seed_, std::uint64_t{0}};
    std::seed_seq added_seq{seed_, std::uint64_t{1}};
    std::mt19937_64 base_rng(base_seq);
    std::mt19937_64 added_rng(added_seq);
    for (const auto& spec : layout) {
        Tensor t(spec.shape);
        fill(t, spec.init, spec.role == ParamRole::Base ? base_rng : added_rng);
        store_.add(spec.name, std::move(t), spec.role, false);
    }
    freeze_base(*this);
    bind();
}

void Model::bind()
{
    const std::size_t heads = config_.heads;
    token_embedding_ = store_.get("embed.token");
    position_embedding_ = store_.get("embed.position");
    layers_.clear();
    for (std::size_t i = 0; i < config_.layers; ++i) {
        const std::string l = layer_prefix(i);
        auto g = [&](const std::string& name) { return store_.get(l + name); };
        LayerParams lp;
        lp.attn = {g("attn.wq"), g("attn.wk"), g("attn.wv"), g("attn.wo"),
                   g("attn.bq"), g("attn.bk"), g("attn.bv"), g("attn.bo"), heads};
        lp.ln1_gain = g("ln1.gain");
        lp.ln1_bias = g("ln1.bias");
        lp.ffn_in = g("ffn.w_in");
        lp.ffn_in_bias = g("ffn.b_in");
        lp.ffn_out = g("ffn.w_out");
        lp.ffn_out_bias = g("ffn.b_out");
        lp.ln2_gain = g("ln2.gain");
        lp.ln2_bias = g("ln2.bias");
        if (mode_.has_lora_q()) lp.lora_q = LoRAParams{g("lora_q.a"), g("lora_q.b")};
        if (mode_.has_lora_v()) lp.lora_v = LoRAParams{g("lora_v.a"), g("lora_v.b")};
        if (mode_.has_prefix()) lp.prefix = PrefixParams{g("prefix.keys"), g("prefix.values")};
        if (mode_.has_inducer()) {
            InducerParams ip;
            if (mode_.key_bottleneck) {
                ip.key_mlp = head_mlps(store_, l + "inducer.key.", heads);
                ip.key_bias = g("inducer.key.b2");
            }
            ip.value_mlp = head_mlps(store_, l + "inducer.value.", heads);
            ip.value_bias = g("inducer.value.b2");
            ip.extended = mode_.extended_values();
            lp.inducer = std::move(ip);
        }
        if (mode_.has_ffn_adapter()) lp.adapter = FFNAdapterParams{g("adapter.w1"), g("adapter.w2")};
        layers_.push_back(std::move(lp));
    }
}

Tensor transformer_layer(const Tensor& x, const LayerParams& layer, const TuningMode& mode, const Mask* mask,
                         InducerForwardTrace* trace)
{
    const auto& w = layer.attn;
    Tensor attn;
    if (layer.inducer) {
        switch (mode.kind) {
        case ModeKind::VariantAdaptive:
        case ModeKind::VariantExtension:
        case ModeKind::VariantGating: attn = variant_attention(mode.kind, x, w, *layer.inducer, mask, trace); break;
        default:
            attn = inducer_attention(x, w, *layer.inducer, layer.lora_q ? &*layer.lora_q : nullptr, mask, trace);
        }
    } else {
        AttentionWeights eff = w;
        if (layer.lora_q) eff.wq = lora_apply(w.wq, *layer.lora_q);
        if (layer.lora_v) eff.wv = lora_apply(w.wv, *layer.lora_v);
        const auto inter = qkv_project(x, eff);
        if (trace) {
            trace->q = inter.q;
            trace->k = inter.k;
            trace->v = inter.v;
        }
        if (layer.prefix) {
            const std::size_t p = w.head_dim();
            std::vector<Tensor> heads;
            for (std::size_t h = 0; h < w.num_heads; ++h) {
                heads.push_back(prefix_attention(head_block(inter.q, h, p), head_block(inter.k, h, p),
                                                 head_block(inter.v, h, p), layer.prefix->head(h, p), mask));
            }
            attn = add_row(matmul(w.num_heads == 1 ? heads.front() : concat_cols(heads), w.wo), w.bo);
        } else {
            attn = attention_from_projections(inter.q, inter.k, inter.v, w, mask);
        }
    }
    const Tensor h = layer_norm(add(x, attn), layer.ln1_gain, layer.ln1_bias);
    Tensor f = add_row(matmul(gelu(add_row(matmul(h, layer.ffn_in), layer.ffn_in_bias)), layer.ffn_out),
                       layer.ffn_out_bias);
    if (layer.adapter) f = ffn_adapter(f, *layer.adapter);
    return layer_norm(add(h, f), layer.ln2_gain, layer.ln2_bias);
}

Tensor mam_compose(const Tensor& x, const LayerParams& layer, const TuningMode& mode, const Mask* mask)
{
    if (mode.kind != ModeKind::MAMInducer && mode.kind != ModeKind::MAMAdapter) {
        throw ConfigError("mam_compose: mode '" + mode.name() + "' is not a Mix-And-Match mode");
    }
    return transformer_layer(x, layer, mode, mask);
}

Tensor Model::forward(std::span<const int> tokens, ForwardTrace* trace) const
{
    const std::size_t n = tokens.size();
    if (n == 0) throw ShapeError("forward: empty token sequence");
    if (n > config_.context) {
        throw ShapeError("forward: " + std::to_string(n) + " tokens exceed context length " +
                         std::to_string(config_.context));
    }
    Tensor x = add(embedding(token_embedding_, tokens), slice_rows(position_embedding_, 0, n));
    const Mask mask = Mask::causal(n);
    if (trace) trace->layers.assign(layers_.size(), {});
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = transformer_layer(x, layers_[i], mode_, &mask, trace ? &trace->layers[i] : nullptr);
    }
    return matmul_nt(x, token_embedding_);
}

Model build_model(const ModelConfig& cfg, const TuningMode& mode, std::uint64_t seed)
{
    return Model(cfg, mode, seed);
}

void freeze_base(Model& model)
{
    const bool full = model.mode().kind == ModeKind::FullFineTune;
    for (const auto& name : model.params().names()) {
        const bool base = model.params().entry(name).role == ParamRole::Base;
        model.params().set_frozen(name, base && !full);
    }
}

ParamReport count_params(const Model& model)
{
    return count_params(parameter_layout(model.config(), model.mode()), model.mode());
}

}  // namespace inducer
