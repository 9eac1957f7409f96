#include "inducer/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "inducer/tape.hpp"

namespace inducer {

double gradient_rel_error(double analytic, double numeric)
{
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> pick_coords(std::size_t numel, std::size_t limit, std::mt19937_64& rng)
{
    std::vector<std::size_t> all(numel);
    std::iota(all.begin(), all.end(), 0);
    limit = std::max<std::size_t>(limit, 64);
    if (numel <= limit) return all;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(limit);
    std::sort(all.begin(), all.end());
    return all;
}

double evaluate(const std::function<Tensor()>& loss, const std::string& name, std::size_t coord)
{
    const double v = loss().item();
    if (!std::isfinite(v)) {
        throw NumericError("grad_check: non-finite loss while perturbing " + name + "[" + std::to_string(coord) + "]");
    }
    return v;
}

}  // namespace

GradReport grad_check(const std::function<Tensor()>& loss, std::vector<NamedTensor> params,
                      const GradCheckOptions& options)
{
    if (!(options.step > 0.0) || options.step > 1e-3) {
        throw ContractError("grad_check: step must lie in (0, 1e-3]");
    }
    for (auto& p : params) {
        p.tensor.set_requires_grad(true);
        p.tensor.zero_grad();
    }
    {
        Tape tape;
        Tensor value;
        {
            auto rec = tape.record();
            value = loss();
        }
        if (value.requires_grad()) tape.backward(value);
    }

    GradReport report;
    std::mt19937_64 rng(options.seed);
    for (auto& p : params) {
        GradCheckEntry entry{p.name};
        auto data = p.tensor.mutable_data();
        const auto grad = p.tensor.mutable_grad();
        const std::vector<double> analytic(grad.begin(), grad.end());
        for (std::size_t i : pick_coords(p.tensor.numel(), options.max_coords_per_tensor, rng)) {
            const double saved = data[i];
            data[i] = saved + options.step;
            const double up = evaluate(loss, p.name, i);
            data[i] = saved - options.step;
            const double down = evaluate(loss, p.name, i);
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            entry.max_rel_error = std::max(entry.max_rel_error, gradient_rel_error(analytic[i], numeric));
            ++entry.coords_checked;
        }
        entry.passed = entry.max_rel_error < options.tolerance;
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.passed = report.passed && entry.passed;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace inducer
