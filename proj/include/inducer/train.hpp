#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "inducer/model.hpp"
#include "inducer/optimizer.hpp"
#include "inducer/task.hpp"

namespace inducer {

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::AdamW;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::size_t batch_size = 8;
    std::size_t steps = 2000;
    std::size_t warmup = 100;
    double clip = 1.0;  // <= 0 disables clipping
    std::size_t eval_every = 100;
    Split eval_split = Split::Val;
    std::uint64_t seed = 0;
    /// Record real elapsed time in wall_ms. Off by default so metrics files
    /// are reproducible byte for byte.
    bool wall_clock = false;

    void validate() const;
};

struct MetricsRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double acc = 0.0;
    double em = 0.0;
    std::string mode;
    double trainable_pct = 0.0;
    double wall_ms = 0.0;

    std::string to_json() const;
};

struct EvalResult {
    double acc = 0.0;
    double em = 0.0;
    std::size_t tokens = 0;
    std::size_t examples = 0;
};

/// logits for a token prefix, n×V
using LogitsFn = std::function<Tensor(std::span<const int>)>;

/// Greedy decoding over each example's answer span: every answer token is fed
/// back as the next input. Token accuracy and exact match count masked
/// positions only.
EvalResult evaluate(const LogitsFn& logits, const Dataset& data, Split split);
EvalResult evaluate(const Model& model, const Dataset& data, Split split);

/// Masked mean cross-entropy of one example.
Tensor example_loss(const Model& model, const Example& ex);

/// Runs tc.steps optimizer steps on the train split. Emits a record every
/// eval_every steps and always after the last one.
std::vector<MetricsRecord> train(Model& model, const Dataset& data, const TrainConfig& tc,
                                 const std::function<void(const MetricsRecord&)>& on_record = {});

}  // namespace inducer
