#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "inducer/model.hpp"
#include "inducer/task.hpp"
#include "inducer/train.hpp"

namespace inducer {

/// Everything a run needs, read from a flat `section.key = value` file.
/// Blank lines and text after '#' are ignored. Keys under `ablate.` are kept
/// verbatim for the ablation driver.
struct RunConfig {
    ModelConfig model = ModelConfig::from_preset("toy");
    TuningMode mode = TuningMode::full();
    TaskSpec task;
    TrainConfig train;
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
    std::map<std::string, std::string> ablate;

    static RunConfig parse(const std::string& text, const std::string& source = "<string>");
    static RunConfig load(const std::filesystem::path& path);
    /// Resolved config; parse(serialize()) reproduces this object.
    std::string serialize() const;

    /// Overrides run.seed and the batch-order seed together.
    void set_seed(std::uint64_t s);
};

/// Builds a mode from a kind or preset name plus optional hyperparameter
/// overrides (keys: key_bottleneck, value_bottleneck, lora_rank,
/// adapter_bottleneck, prefix_length). Missing values come from the kind's
/// canonical preset.
TuningMode resolve_mode(const std::string& name, const std::map<std::string, std::size_t>& overrides);

}  // namespace inducer
