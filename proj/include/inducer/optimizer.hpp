#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "inducer/tensor.hpp"

namespace inducer {

enum class OptimizerKind { Adam, AdamW };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct AdamOptions {
    OptimizerKind kind = OptimizerKind::AdamW;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Adam folds this into the gradient (L2); AdamW decays the weights directly.
    double weight_decay = 0.0;
};

/// Adam / AdamW over a fixed tensor list. Tensors without a gradient buffer
/// are skipped, so frozen tensors are never written.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamOptions options);

    void step(double lr);
    std::size_t steps_taken() const { return t_; }
    const AdamOptions& options() const { return options_; }

private:
    std::vector<Tensor> params_;
    AdamOptions options_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

/// Scales gradients in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(std::span<const Tensor> params, double max_norm);

/// Piecewise-linear schedule through (0, 0), (warmup, peak), (steps, 0).
double learning_rate(double peak, std::size_t warmup, std::size_t steps, std::size_t step);

}  // namespace inducer
