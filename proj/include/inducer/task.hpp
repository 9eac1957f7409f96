#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace inducer {

enum class TaskKind { Copy, Reverse, KVRetrieval };
enum class Split { Train, Val, Test };

std::string_view task_kind_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);
std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// Reserved token ids; content tokens start at kFirstContentToken.
inline constexpr int kSepToken = 0;
inline constexpr int kQueryToken = 1;
inline constexpr int kFirstContentToken = 2;

struct TaskSpec {
    TaskKind kind = TaskKind::Copy;
    std::size_t vocab = 16;
    /// Copy/reverse: content length. Key-value retrieval: full input length.
    std::size_t length = 8;
    /// Key-value pairs; 0 derives (length - 2) / 2.
    std::size_t pairs = 0;
    std::size_t train_size = 32;
    std::size_t val_size = 32;
    std::size_t test_size = 32;
    std::uint64_t seed = 0;

    std::size_t num_pairs() const;
    /// Tokens fed to the model per example.
    std::size_t input_length() const;
    std::size_t size(Split split) const;
    void validate() const;
};

/// input[t] is the token at position t; target[t] is the token the model should
/// predict there. Only positions with loss_mask[t] = 1 are scored.
struct Example {
    std::vector<int> input;
    std::vector<int> target;
    std::vector<std::uint8_t> loss_mask;
};

class Dataset {
public:
    explicit Dataset(TaskSpec spec);

    const TaskSpec& spec() const { return spec_; }
    std::size_t size(Split split) const { return spec_.size(split); }
    /// Pure function of (spec, split, index).
    Example example(Split split, std::size_t index) const;

private:
    TaskSpec spec_;
};

Dataset make_task(const TaskSpec& spec);

}  // namespace inducer
