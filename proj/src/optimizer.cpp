#include "inducer/optimizer.hpp"

#include <cmath>
#include <string>

namespace inducer {

std::string_view optimizer_name(OptimizerKind kind)
{
    return kind == OptimizerKind::Adam ? "adam" : "adamw";
}

OptimizerKind parse_optimizer(std::string_view name)
{
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "adamw") return OptimizerKind::AdamW;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'; valid optimizers: adam, adamw");
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options)
{
    if (options_.beta1 < 0 || options_.beta1 >= 1 || options_.beta2 < 0 || options_.beta2 >= 1) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (options_.eps <= 0) throw ConfigError("Adam epsilon must be positive");
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step(double lr)
{
    ++t_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double wd = options_.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        if (!p.requires_grad() || !p.has_grad()) continue;
        auto theta = p.mutable_data();
        const auto g = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double gi = g[i];
            if (options_.kind == OptimizerKind::Adam) gi += wd * theta[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            if (options_.kind == OptimizerKind::AdamW) theta[i] -= lr * wd * theta[i];
            theta[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

double clip_grad_norm(std::span<const Tensor> params, double max_norm)
{
    double sq = 0.0;
    for (const auto& p : params)
        if (p.has_grad())
            for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto p : params)
            if (p.has_grad())
                for (double& g : p.mutable_grad()) g *= s;
    }
    return norm;
}

double learning_rate(double peak, std::size_t warmup, std::size_t steps, std::size_t step)
{
    if (step >= steps) return 0.0;
    if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (steps == warmup) return peak;
    return peak * static_cast<double>(steps - step) / static_cast<double>(steps - warmup);
}

}  // namespace inducer
