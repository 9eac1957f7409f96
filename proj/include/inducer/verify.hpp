#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "inducer/model.hpp"

namespace inducer {

struct PropertyResult {
    std::string suite;
    std::string name;
    bool passed = false;
    double observed = 0.0;  // max error, or the measured quantity
    double bound = 0.0;
    std::string detail;
};

/// algebra, gradients, freezing, causal, kernel, counts
std::vector<std::string> verify_suite_names();
/// Runs one suite (or "all") with fixed seeds. Throws ConfigError for an
/// unknown suite name.
std::vector<PropertyResult> run_verify_suite(std::string_view suite, std::uint64_t seed = 1);

/// Adds uniform noise in [-scale, scale] to every trainable tensor, so
/// zero-initialised second layers stop hiding their gradients.
void perturb_trainable(Model& model, std::uint64_t seed, double scale);

/// Small-size instance of each mode kind, for toy models.
TuningMode toy_mode(ModeKind kind);

}  // namespace inducer
