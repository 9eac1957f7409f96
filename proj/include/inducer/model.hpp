#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "inducer/peft.hpp"
#include "inducer/tuning_mode.hpp"

namespace inducer {

struct ModelConfig {
    std::string preset = "custom";
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t head_dim = 8;
    std::size_t ffn_dim = 0;  // 0 selects 4·d
    std::size_t vocab = 32;
    std::size_t context = 64;

    std::size_t model_dim() const { return heads * head_dim; }
    std::size_t ffn() const { return ffn_dim ? ffn_dim : 4 * model_dim(); }

    /// "gpt2-small" (12 layers, 12×64 heads, vocab 50257, context 1024) or
    /// "toy" (2 layers, 2×8 heads, vocab 32, context 64).
    static ModelConfig from_preset(std::string_view name);
    void validate() const;
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

enum class ParamRole { Base, Added };
enum class InitKind { Normal, Uniform, Zeros, Ones };

struct ParamSpec {
    std::string name;
    Shape shape;
    ParamRole role;
    InitKind init;
};

/// Every tensor a (config, mode) pair owns, in storage order.
std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg, const TuningMode& mode);

struct ParamReport {
    std::size_t base_total = 0;  // frozen backbone
    std::size_t total = 0;       // backbone plus added tensors
    std::size_t trainable = 0;
    std::size_t storable = 0;    // what must be kept per task after tuning
    double trainable_pct = 0.0;  // relative to base_total
    double storable_pct = 0.0;
};

ParamReport count_params(std::span<const ParamSpec> layout, const TuningMode& mode);

/// Named tensors with a frozen flag each. Frozen tensors never require a
/// gradient, so the optimizer cannot reach them.
class ParameterStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        ParamRole role;
        bool frozen;
    };

    void add(std::string name, Tensor tensor, ParamRole role, bool frozen);
    bool contains(const std::string& name) const { return index_.contains(name); }
    const Tensor& get(const std::string& name) const;
    const Entry& entry(const std::string& name) const;
    void set_frozen(const std::string& name, bool frozen);

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::vector<std::string> names() const;
    std::vector<std::string> trainable_names() const;
    std::vector<Tensor> trainable() const;
    void zero_grads();

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ForwardTrace {
    std::vector<InducerForwardTrace> layers;
};

struct LayerParams {
    AttentionWeights attn;
    Tensor ln1_gain, ln1_bias;
    Tensor ffn_in, ffn_in_bias, ffn_out, ffn_out_bias;
    Tensor ln2_gain, ln2_bias;
    std::optional<LoRAParams> lora_q, lora_v;
    std::optional<PrefixParams> prefix;
    std::optional<InducerParams> inducer;
    std::optional<FFNAdapterParams> adapter;
};

/// Post-norm decoder layer: LN(x + Attn(x)) then LN(h + FFN(h)), with the
/// mode's mechanisms on the attention side and after the FFN.
Tensor transformer_layer(const Tensor& x, const LayerParams& layer, const TuningMode& mode, const Mask* mask,
                         InducerForwardTrace* trace = nullptr);
/// Layer forward for the Mix-And-Match modes; rejects any other mode.
Tensor mam_compose(const Tensor& x, const LayerParams& layer, const TuningMode& mode, const Mask* mask);

class Model {
public:
    Model(ModelConfig config, TuningMode mode, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const TuningMode& mode() const { return mode_; }
    std::uint64_t seed() const { return seed_; }
    const ParameterStore& params() const { return store_; }
    ParameterStore& params() { return store_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

    /// Causal decoder forward producing n×V logits (output head tied to the
    /// token embedding).
    Tensor forward(std::span<const int> tokens, ForwardTrace* trace = nullptr) const;

    std::vector<Tensor> trainable() const { return store_.trainable(); }
    void zero_grads() { store_.zero_grads(); }

private:
    void bind();

    ModelConfig config_;
    TuningMode mode_;
    std::uint64_t seed_;
    ParameterStore store_;
    Tensor token_embedding_, position_embedding_;
    std::vector<LayerParams> layers_;
};

/// Deterministic initialisation: the backbone draws from a stream that depends
/// only on (config, seed), so every mode shares the same base weights.
Model build_model(const ModelConfig& cfg, const TuningMode& mode, std::uint64_t seed);

/// Freezes the backbone unless the mode fine-tunes everything; added tensors
/// stay trainable.
void freeze_base(Model& model);

ParamReport count_params(const Model& model);

}  // namespace inducer
