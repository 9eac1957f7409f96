#include "inducer/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "inducer/tape.hpp"

namespace inducer {

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row)
{
    const std::size_t v = logits.cols();
    const auto d = logits.data().subspan(row * v, v);
    std::size_t best = 0;
    for (std::size_t j = 1; j < v; ++j)
        if (d[j] > d[best]) best = j;
    return best;
}

}  // namespace

void TrainConfig::validate() const
{
    if (lr < 0) throw ConfigError("learning rate must be non-negative");
    if (warmup > steps) throw ConfigError("warmup (" + std::to_string(warmup) + ") exceeds steps (" +
                                          std::to_string(steps) + ")");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
}

std::string MetricsRecord::to_json() const
{
    nlohmann::ordered_json j;
    j["step"] = step;
    j["loss"] = loss;
    j["acc"] = acc;
    j["em"] = em;
    j["mode"] = mode;
    j["trainable_pct"] = trainable_pct;
    j["wall_ms"] = wall_ms;
    return j.dump();
}

EvalResult evaluate(const LogitsFn& logits, const Dataset& data, Split split)
{
    EvalResult r;
    std::size_t correct = 0, exact = 0;
    for (std::size_t i = 0; i < data.size(split); ++i) {
        const Example ex = data.example(split, i);
        std::vector<int> seq = ex.input;
        std::vector<std::size_t> answer;
        for (std::size_t t = 0; t < seq.size(); ++t)
            if (ex.loss_mask[t]) answer.push_back(t);
        if (answer.empty()) continue;

        // One forward covers every position up to the first wrong guess, since
        // a causal model's earlier logits ignore later inputs.
        std::size_t next = 0, hits = 0;
        while (next < answer.size()) {
            const std::size_t last = answer.back();
            const Tensor out = logits(std::span<const int>(seq.data(), last + 1));
            for (; next < answer.size(); ++next) {
                const std::size_t t = answer[next];
                const int pred = static_cast<int>(argmax_row(out, t));
                const bool ok = pred == ex.target[t];
                hits += ok;
                const bool feeds = t + 1 < seq.size() && seq[t + 1] != pred;
                if (t + 1 < seq.size()) seq[t + 1] = pred;
                if (feeds && next + 1 < answer.size()) {
                    ++next;
                    break;
                }
            }
        }
        correct += hits;
        exact += hits == answer.size();
        r.tokens += answer.size();
        ++r.examples;
    }
    if (r.tokens) r.acc = static_cast<double>(correct) / static_cast<double>(r.tokens);
    if (r.examples) r.em = static_cast<double>(exact) / static_cast<double>(r.examples);
    return r;
}

EvalResult evaluate(const Model& model, const Dataset& data, Split split)
{
    return evaluate([&model](std::span<const int> tokens) { return model.forward(tokens); }, data, split);
}

Tensor example_loss(const Model& model, const Example& ex)
{
    return cross_entropy_loss(model.forward(ex.input), ex.target, ex.loss_mask);
}

std::vector<MetricsRecord> train(Model& model, const Dataset& data, const TrainConfig& tc,
                                 const std::function<void(const MetricsRecord&)>& on_record)
{
    tc.validate();
    const auto params = model.trainable();
    Adam opt(params, {tc.optimizer, tc.beta1, tc.beta2, tc.eps, tc.weight_decay});
    const double pct = count_params(model).trainable_pct;
    const std::string mode = model.mode().name();

    std::seed_seq seq{tc.seed, std::uint64_t{0x7261696e}};
    std::mt19937_64 rng(seq);
    const std::size_t n_train = data.size(Split::Train);
    std::vector<std::size_t> order(n_train);
    std::size_t cursor = n_train;

    const auto start = std::chrono::steady_clock::now();
    std::vector<MetricsRecord> records;
    double loss_sum = 0.0;
    std::size_t loss_steps = 0;
    const double inv_batch = 1.0 / static_cast<double>(tc.batch_size);

    for (std::size_t step = 0; step < tc.steps; ++step) {
        model.zero_grads();
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < tc.batch_size; ++b) {
            if (cursor == n_train) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const Example ex = data.example(Split::Train, order[cursor++]);
            Tape tape;
            Tensor loss;
            {
                Tape::Recording rec(tape);
                loss = scale(example_loss(model, ex), inv_batch);
            }
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw NumericError("non-finite loss " + std::to_string(value) + " at step " + std::to_string(step));
            }
            batch_loss += value;
            if (!params.empty()) tape.backward(loss);
        }
        clip_grad_norm(params, tc.clip);
        opt.step(learning_rate(tc.lr, tc.warmup, tc.steps, step));
        loss_sum += batch_loss;
        ++loss_steps;

        const std::size_t done = step + 1;
        if (done % tc.eval_every == 0 || done == tc.steps) {
            const EvalResult ev = evaluate(model, data, tc.eval_split);
            MetricsRecord rec;
            rec.step = done;
            rec.loss = loss_sum / static_cast<double>(loss_steps);
            rec.acc = ev.acc;
            rec.em = ev.em;
            rec.mode = mode;
            rec.trainable_pct = pct;
            if (tc.wall_clock) {
                rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                                  .count();
            }
            loss_sum = 0.0;
            loss_steps = 0;
            records.push_back(rec);
            if (on_record) on_record(rec);
        }
    }
    return records;
}

}  // namespace inducer
