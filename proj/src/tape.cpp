#include "mygo/tape.hpp"

#include "mygo/errors.hpp"

namespace mygo {

template <typename Real>
Var Tape<Real>::param(const Tensor<Real>& tensor) {
    if (auto it = param_nodes_.find(&tensor); it != param_nodes_.end()) return Var{it->second};
    Node node;
    node.external = &tensor;
    node.needs_grad = recording_ && tensor.requires_grad();
    if (node.needs_grad) node.grad.assign(tensor.size(), Real{0});
    nodes_.push_back(std::move(node));
    param_nodes_.emplace(&tensor, nodes_.size() - 1);
    return Var{nodes_.size() - 1};
}

template <typename Real>
Var Tape<Real>::constant(Tensor<Real> value) {
    Node node;
    node.owned = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

template <typename Real>
Var Tape<Real>::push(Tensor<Real> value, bool needs_grad, Backward backward) {
    Node node;
    node.owned = std::move(value);
    node.needs_grad = recording_ && needs_grad;
    if (node.needs_grad) {
        node.grad.assign(node.owned.size(), Real{0});
        node.backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

template <typename Real>
const Tensor<Real>& Tape<Real>::value(Var v) const {
    const Node& node = nodes_.at(v.id);
    return node.external ? *node.external : node.owned;
}

template <typename Real>
void Tape<Real>::backward(Var output) {
    Node& out = nodes_.at(output.id);
    if (value(output).size() != 1) throw NumericError("backward requires a scalar output");
    if (!out.needs_grad) return;
    out.grad[0] += Real{1};
    for (std::size_t i = output.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (node.backward) node.backward(*this, Var{i});
    }
}

template <typename Real>
std::span<const Real> Tape<Real>::param_grad(const Tensor<Real>& tensor) const {
    auto it = param_nodes_.find(&tensor);
    if (it == param_nodes_.end()) return {};
    return nodes_[it->second].grad;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mygo
