#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace inducer {

enum class ModeKind {
    FullFineTune,
    FFNAdapter,
    Prefix,
    LoRA,
    Inducer,
    InducerPlusLoRA,
    MAMInducer,
    MAMAdapter,
    VariantAdaptive,
    VariantExtension,
    VariantGating,
};

std::string_view mode_kind_name(ModeKind kind);
std::optional<ModeKind> parse_mode_kind(std::string_view name);
std::vector<std::string> mode_kind_names();

/// Which mechanism(s) to attach and their sizes. A hyperparameter is set
/// exactly when the kind uses it.
struct TuningMode {
    ModeKind kind = ModeKind::FullFineTune;
    std::optional<std::size_t> key_bottleneck;      // MLP_k
    std::optional<std::size_t> value_bottleneck;    // MLP_v / extended MLP_v
    std::optional<std::size_t> lora_rank;
    std::optional<std::size_t> adapter_bottleneck;  // FFN adapter
    std::optional<std::size_t> prefix_length;
    std::string preset;  // empty unless built from a named preset

    static TuningMode full() { return {}; }
    /// Named settings: "full", "inducer", "inducer+lora", "mam-inducer",
    /// "adaptive", "extension", "gating", "adapter-108", "lora-54",
    /// "prefix-108", "mam-adapter". Throws ConfigError listing valid names.
    static TuningMode from_preset(std::string_view name);
    static std::vector<std::string> preset_names();
    /// Canonical preset for a kind (the published setting for that method).
    static TuningMode default_for(ModeKind kind);

    /// Throws ConfigError when a required hyperparameter is missing, an
    /// unused one is present, or a size is zero.
    void validate() const;

    std::string name() const;
    bool has_ffn_adapter() const;
    bool has_prefix() const;
    bool has_lora_q() const;
    bool has_lora_v() const;
    bool has_inducer() const;
    bool extended_values() const;
};

bool operator==(const TuningMode& a, const TuningMode& b);

}  // namespace inducer
