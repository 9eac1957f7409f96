#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "inducer/tensor.hpp"

namespace inducer {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-5;
    /// Tensors larger than this are checked on a random subset of this many
    /// coordinates; never fewer than 64.
    std::size_t max_coords_per_tensor = 256;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string name;
    std::size_t coords_checked = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = true;
};

/// |a - b| / max(1, |a|, |b|)
double gradient_rel_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `loss` (rebuilt on every call) with
/// central differences. Gradients already accumulated in `params` are cleared.
/// Throws NumericError if a perturbed evaluation is not finite.
GradReport grad_check(const std::function<Tensor()>& loss, std::vector<NamedTensor> params,
                      const GradCheckOptions& options = {});

}  // namespace inducer
