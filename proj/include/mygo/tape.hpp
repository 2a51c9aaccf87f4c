#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mygo/tensor.hpp"

namespace mygo {

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Records differentiable ops in execution order and replays their gradient
/// rules in exact reverse order. Gradients are always accumulated (+=), so a
/// value consumed by several ops receives the sum of their contributions.
///
/// Parameters are bound by reference: the tape never copies or mutates them,
/// it only keeps one gradient buffer per bound parameter.
template <typename Real>
class Tape {
public:
    /// Gradient rule; receives the tape and the handle of its own output.
    using Backward = std::function<void(Tape&, Var)>;

    /// A non-recording tape evaluates ops forward only (no gradient buffers).
    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    /// Bind a parameter. Binding the same tensor twice yields the same Var.
    Var param(const Tensor<Real>& tensor);
    /// Record a value that never receives gradient.
    Var constant(Tensor<Real> value);
    /// Record an op result. `needs_grad` should be true iff some input needs it;
    /// the backward rule is dropped otherwise.
    Var push(Tensor<Real> value, bool needs_grad, Backward backward);

    const Tensor<Real>& value(Var v) const;
    bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
    /// Gradient buffer of v; empty if v does not need gradient.
    std::span<Real> grad(Var v) { return nodes_.at(v.id).grad; }
    std::span<const Real> grad(Var v) const { return nodes_.at(v.id).grad; }

    /// Seed d(output)/d(output) = 1 for a single-element output and
    /// run every recorded gradient rule in reverse.
    void backward(Var output);

    /// Gradient accumulated for a bound parameter; empty if never bound.
    std::span<const Real> param_grad(const Tensor<Real>& tensor) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<Real> owned;
        const Tensor<Real>* external = nullptr;
        std::vector<Real> grad;
        bool needs_grad = false;
        Backward backward;
    };

    bool recording_;
    std::vector<Node> nodes_;
    std::unordered_map<const Tensor<Real>*, std::size_t> param_nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mygo
