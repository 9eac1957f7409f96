#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "inducer/tensor.hpp"

namespace inducer {

/// Ordered record of primitive operations. A tape is bound to the thread that
/// activates it; ops executed while a Recording is alive append nodes here.
class Tape {
public:
    struct Node {
        std::string op;
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void(std::span<double>)> forward;
        std::function<void()> backward;
    };

    /// RAII guard making this tape the active one for the current thread.
    class Recording {
    public:
        explicit Recording(Tape& tape);
        ~Recording();
        Recording(const Recording&) = delete;
        Recording& operator=(const Recording&) = delete;

    private:
        Tape* previous_;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] Recording record() { return Recording(*this); }
    static Tape* active();

    void push(Node node);

    /// Reverse sweep from a scalar loss produced on this tape. Leaf gradients
    /// accumulate (+=); gradients of recorded intermediates are reset first.
    void backward(const Tensor& loss);

    /// Re-runs every recorded forward and reports whether all outputs are
    /// reproduced bit for bit.
    bool replay() const;

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    void clear();

private:
    std::vector<Node> nodes_;
    std::unordered_set<const TensorImpl*> outputs_;
};

/// Clears the gradients of the given tensors.
void zero_grads(std::span<Tensor> tensors);

}  // namespace inducer
