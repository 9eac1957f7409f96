#include "inducer/task.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "inducer/tensor.hpp"

namespace inducer {

std::string_view task_kind_name(TaskKind kind)
{
    switch (kind) {
    case TaskKind::Copy: return "copy";
    case TaskKind::Reverse: return "reverse";
    case TaskKind::KVRetrieval: return "kv-retrieval";
    }
    return "unknown";
}

TaskKind parse_task_kind(std::string_view name)
{
    if (name == "copy") return TaskKind::Copy;
    if (name == "reverse") return TaskKind::Reverse;
    if (name == "kv-retrieval") return TaskKind::KVRetrieval;
    throw ConfigError("unknown task '" + std::string(name) + "'; valid tasks: copy, reverse, kv-retrieval");
}

std::string_view split_name(Split split)
{
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name)
{
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw ConfigError("unknown split '" + std::string(name) + "'; valid splits: train, val, test");
}

std::size_t TaskSpec::num_pairs() const
{
    if (kind != TaskKind::KVRetrieval) return 0;
    return pairs ? pairs : (length >= 4 ? (length - 2) / 2 : 0);
}

std::size_t TaskSpec::input_length() const
{
    return kind == TaskKind::KVRetrieval ? 2 * num_pairs() + 2 : 2 * length;
}

std::size_t TaskSpec::size(Split split) const
{
    switch (split) {
    case Split::Train: return train_size;
    case Split::Val: return val_size;
    case Split::Test: return test_size;
    }
    return 0;
}

void TaskSpec::validate() const
{
    if (vocab <= static_cast<std::size_t>(kFirstContentToken)) {
        throw ConfigError("task vocab " + std::to_string(vocab) + " leaves no content tokens");
    }
    const std::size_t content = vocab - kFirstContentToken;
    if (kind == TaskKind::KVRetrieval) {
        if (num_pairs() == 0) throw ConfigError("kv-retrieval needs at least one pair (length >= 4)");
        if (pairs && length && length != input_length()) {
            throw ConfigError("kv-retrieval length " + std::to_string(length) + " disagrees with " +
                              std::to_string(pairs) + " pairs (needs " + std::to_string(input_length()) + ")");
        }
        if (content < num_pairs()) {
            throw ConfigError("kv-retrieval with " + std::to_string(num_pairs()) + " distinct keys needs vocab >= " +
                              std::to_string(num_pairs() + kFirstContentToken));
        }
    } else if (length == 0) {
        throw ConfigError("task length must be positive");
    }
    if (train_size == 0) throw ConfigError("train_size must be positive");
}

Dataset::Dataset(TaskSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
}

Example Dataset::example(Split split, std::size_t index) const
{
    if (index >= spec_.size(split)) {
        throw IndexError("example " + std::to_string(index) + " out of range for " + std::string(split_name(split)) +
                         " split of size " + std::to_string(spec_.size(split)));
    }
    std::seed_seq seq{spec_.seed, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(index)};
    std::mt19937_64 rng(seq);
    const int content = static_cast<int>(spec_.vocab) - kFirstContentToken;
    std::uniform_int_distribution<int> token(kFirstContentToken, kFirstContentToken + content - 1);

    std::vector<int> full;
    std::size_t answer_begin = 0;
    if (spec_.kind == TaskKind::KVRetrieval) {
        const std::size_t k = spec_.num_pairs();
        std::vector<int> keys(static_cast<std::size_t>(content));
        std::iota(keys.begin(), keys.end(), kFirstContentToken);
        std::shuffle(keys.begin(), keys.end(), rng);
        keys.resize(k);
        std::vector<int> values(k);
        for (auto& v : values) v = token(rng);
        for (std::size_t i = 0; i < k; ++i) {
            full.push_back(keys[i]);
            full.push_back(values[i]);
        }
        const std::size_t q = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
        full.push_back(kQueryToken);
        full.push_back(keys[q]);
        full.push_back(values[q]);
        answer_begin = full.size() - 2;
    } else {
        const std::size_t n = spec_.length;
        std::vector<int> s(n);
        for (auto& t : s) t = token(rng);
        full = s;
        full.push_back(kSepToken);
        if (spec_.kind == TaskKind::Reverse) std::reverse(s.begin(), s.end());
        full.insert(full.end(), s.begin(), s.end());
        answer_begin = n;
    }

    Example ex;
    ex.input.assign(full.begin(), full.end() - 1);
    ex.target.assign(full.begin() + 1, full.end());
    ex.loss_mask.assign(ex.input.size(), 0);
    for (std::size_t t = answer_begin; t < ex.input.size(); ++t) ex.loss_mask[t] = 1;
    return ex;
}

Dataset make_task(const TaskSpec& spec)
{
    return Dataset(spec);
}

}  // namespace inducer
