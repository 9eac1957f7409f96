#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inducer/run_config.hpp"
#include "inducer/train.hpp"

namespace inducer {

/// build, freeze, train, save. Writes config.cfg (resolved), metrics.jsonl and
/// checkpoint.bin into `out_dir`, creating it if needed.
std::vector<MetricsRecord> execute_run(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                       const std::function<void(const MetricsRecord&)>& on_record = {});

struct AblationRun {
    std::string mode;
    std::uint64_t seed = 0;
    std::optional<MetricsRecord> final;  // empty when the run failed
    std::string error;
};

struct AblationRow {
    std::string mode;
    ModeKind kind = ModeKind::FullFineTune;
    double trainable_pct = 0.0;
    std::size_t runs = 0;
    std::size_t failed = 0;
    double acc_mean = 0.0, acc_sd = 0.0;
    double em_mean = 0.0, em_sd = 0.0;
};

struct AblationTable {
    std::vector<AblationRun> runs;
    std::vector<AblationRow> rows;
    /// Mean accuracy of the inducer row is at least that of the prefix row;
    /// empty when either row is missing or has no finished run.
    std::optional<bool> inducer_ge_prefix;

    std::string to_tsv() const;
};

/// Mode hyperparameters come from `ablate.<mode>.<param>` keys in `base`,
/// falling back to the base config's own mode.* values when the kinds match.
TuningMode ablation_mode(const RunConfig& base, const std::string& name);

/// Trains every (mode, seed) pair in order. A failed run is recorded and the
/// sweep continues. Per-run outputs go to out_dir/<mode>-seed<seed>.
AblationTable run_ablation(const RunConfig& base, const std::vector<std::string>& modes,
                           const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                           const std::function<void(const AblationRun&)>& on_run = {});

}  // namespace inducer
