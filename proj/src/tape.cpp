#include "inducer/tape.hpp"

#include <algorithm>
#include <cstring>

namespace inducer {

namespace {
thread_local Tape* active_tape = nullptr;
}

Tape::Recording::Recording(Tape& tape) : previous_(active_tape)
{
    active_tape = &tape;
}

Tape::Recording::~Recording()
{
    active_tape = previous_;
}

Tape* Tape::active()
{
    return active_tape;
}

void Tape::push(Node node)
{
    outputs_.insert(node.output.impl());
    nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss)
{
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            (loss.defined() ? shape_to_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!outputs_.contains(loss.impl())) {
        throw ContractError("backward: loss was not produced on this tape");
    }
    for (const auto& node : nodes_) {
        auto grad = Tensor(node.output).mutable_grad();
        std::fill(grad.begin(), grad.end(), 0.0);
    }
    Tensor(loss).mutable_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

bool Tape::replay() const
{
    std::vector<double> scratch;
    for (const auto& node : nodes_) {
        scratch.assign(node.output.numel(), 0.0);
        node.forward(scratch);
        if (std::memcmp(scratch.data(), node.output.data().data(), scratch.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

void Tape::clear()
{
    nodes_.clear();
    outputs_.clear();
}

void zero_grads(std::span<Tensor> tensors)
{
    for (auto& t : tensors) t.zero_grad();
}

}  // namespace inducer
