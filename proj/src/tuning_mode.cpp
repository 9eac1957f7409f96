#include "inducer/tuning_mode.hpp"

#include <array>
#include <utility>

#include "inducer/tensor.hpp"

namespace inducer {

namespace {

constexpr std::array<std::pair<ModeKind, std::string_view>, 11> kKindNames{{
    {ModeKind::FullFineTune, "full"},
    {ModeKind::FFNAdapter, "adapter"},
    {ModeKind::Prefix, "prefix"},
    {ModeKind::LoRA, "lora"},
    {ModeKind::Inducer, "inducer"},
    {ModeKind::InducerPlusLoRA, "inducer+lora"},
    {ModeKind::MAMInducer, "mam-inducer"},
    {ModeKind::MAMAdapter, "mam-adapter"},
    {ModeKind::VariantAdaptive, "adaptive"},
    {ModeKind::VariantExtension, "extension"},
    {ModeKind::VariantGating, "gating"},
}};

struct Preset {
    std::string_view name;
    ModeKind kind;
    std::size_t key, value, lora, adapter, prefix;  // 0 = unused, except prefix where npos = unused
};

constexpr std::size_t kUnused = static_cast<std::size_t>(-1);

// Bottlenecks / ranks / prefix lengths of the published GPT-2 experiments.
constexpr std::array<Preset, 11> kPresets{{
    {"full", ModeKind::FullFineTune, 0, 0, 0, 0, kUnused},
    {"inducer", ModeKind::Inducer, 10, 15, 0, 0, kUnused},
    {"inducer+lora", ModeKind::InducerPlusLoRA, 5, 12, 24, 0, kUnused},
    {"mam-inducer", ModeKind::MAMInducer, 3, 7, 16, 42, kUnused},
    {"adaptive", ModeKind::VariantAdaptive, 0, 108, 0, 0, kUnused},
    {"extension", ModeKind::VariantExtension, 0, 16, 0, 0, kUnused},
    {"gating", ModeKind::VariantGating, 10, 15, 0, 0, kUnused},
    {"adapter-108", ModeKind::FFNAdapter, 0, 0, 0, 108, kUnused},
    {"lora-54", ModeKind::LoRA, 0, 0, 54, 0, kUnused},
    {"prefix-108", ModeKind::Prefix, 0, 0, 0, 0, 108},
    {"mam-adapter", ModeKind::MAMAdapter, 0, 0, 0, 102, 6},
}};

std::optional<std::size_t> opt(std::size_t v)
{
    return v == 0 ? std::nullopt : std::optional<std::size_t>(v);
}

TuningMode from(const Preset& p)
{
    TuningMode m;
    m.kind = p.kind;
    m.key_bottleneck = opt(p.key);
    m.value_bottleneck = opt(p.value);
    m.lora_rank = opt(p.lora);
    m.adapter_bottleneck = opt(p.adapter);
    if (p.prefix != kUnused) m.prefix_length = p.prefix;
    m.preset = std::string(p.name);
    return m;
}

struct Needs {
    bool key, value, lora, adapter, prefix;
};

Needs needs(ModeKind kind)
{
    switch (kind) {
    case ModeKind::FullFineTune: return {false, false, false, false, false};
    case ModeKind::FFNAdapter: return {false, false, false, true, false};
    case ModeKind::Prefix: return {false, false, false, false, true};
    case ModeKind::LoRA: return {false, false, true, false, false};
    case ModeKind::Inducer: return {true, true, false, false, false};
    case ModeKind::InducerPlusLoRA: return {true, true, true, false, false};
    case ModeKind::MAMInducer: return {true, true, true, true, false};
    case ModeKind::MAMAdapter: return {false, false, false, true, true};
    case ModeKind::VariantAdaptive: return {false, true, false, false, false};
    case ModeKind::VariantExtension: return {false, true, false, false, false};
    case ModeKind::VariantGating: return {true, true, false, false, false};
    }
    return {};
}

void check(const std::optional<std::size_t>& value, bool needed, bool zero_ok, std::string_view field,
           std::string_view mode)
{
    const std::string where = std::string(field) + " for mode '" + std::string(mode) + "'";
    if (needed && !value) throw ConfigError("missing " + where);
    if (!needed && value) throw ConfigError("unexpected " + where);
    if (value && *value == 0 && !zero_ok) throw ConfigError(where + " must be at least 1");
}

}  // namespace

std::string_view mode_kind_name(ModeKind kind)
{
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

std::optional<ModeKind> parse_mode_kind(std::string_view name)
{
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    return std::nullopt;
}

std::vector<std::string> mode_kind_names()
{
    std::vector<std::string> out;
    for (const auto& entry : kKindNames) out.emplace_back(entry.second);
    return out;
}

TuningMode TuningMode::from_preset(std::string_view name)
{
    for (const auto& p : kPresets)
        if (p.name == name) return from(p);
    std::string valid;
    for (const auto& p : kPresets) valid += (valid.empty() ? "" : ", ") + std::string(p.name);
    throw ConfigError("unknown preset '" + std::string(name) + "'; valid presets: " + valid);
}

std::vector<std::string> TuningMode::preset_names()
{
    std::vector<std::string> out;
    for (const auto& p : kPresets) out.emplace_back(p.name);
    return out;
}

TuningMode TuningMode::default_for(ModeKind kind)
{
    for (const auto& p : kPresets)
        if (p.kind == kind) return from(p);
    return full();
}

void TuningMode::validate() const
{
    const auto n = needs(kind);
    const auto label = mode_kind_name(kind);
    check(key_bottleneck, n.key, false, "key bottleneck", label);
    check(value_bottleneck, n.value, false, "value bottleneck", label);
    check(lora_rank, n.lora, false, "LoRA rank", label);
    check(adapter_bottleneck, n.adapter, false, "adapter bottleneck", label);
    check(prefix_length, n.prefix, true, "prefix length", label);
}

std::string TuningMode::name() const
{
    return preset.empty() ? std::string(mode_kind_name(kind)) : preset;
}

bool TuningMode::has_ffn_adapter() const
{
    return kind == ModeKind::FFNAdapter || kind == ModeKind::MAMInducer || kind == ModeKind::MAMAdapter;
}

bool TuningMode::has_prefix() const
{
    return (kind == ModeKind::Prefix || kind == ModeKind::MAMAdapter) && prefix_length.value_or(0) > 0;
}

bool TuningMode::has_lora_q() const
{
    return kind == ModeKind::LoRA || kind == ModeKind::InducerPlusLoRA || kind == ModeKind::MAMInducer;
}

bool TuningMode::has_lora_v() const
{
    return kind == ModeKind::LoRA;
}

bool TuningMode::has_inducer() const
{
    switch (kind) {
    case ModeKind::Inducer:
    case ModeKind::InducerPlusLoRA:
    case ModeKind::MAMInducer:
    case ModeKind::VariantAdaptive:
    case ModeKind::VariantExtension:
    case ModeKind::VariantGating: return true;
    default: return false;
    }
}

bool TuningMode::extended_values() const
{
    return has_inducer() && kind != ModeKind::VariantAdaptive;
}

bool operator==(const TuningMode& a, const TuningMode& b)
{
    return a.kind == b.kind && a.key_bottleneck == b.key_bottleneck && a.value_bottleneck == b.value_bottleneck &&
           a.lora_rank == b.lora_rank && a.adapter_bottleneck == b.adapter_bottleneck &&
           a.prefix_length == b.prefix_length && a.preset == b.preset;
}

}  // namespace inducer
