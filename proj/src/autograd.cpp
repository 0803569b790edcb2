#include "procan/autograd.hpp"

#include "procan/errors.hpp"

namespace procan {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, grad_enabled_, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{this, it->second};
  nodes_.push_back(Node{p.value, {}, {}, {}, grad_enabled_, &p});
  bound_.emplace(&p, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  if (grad_enabled_)
    for (auto id : inputs) needs = needs || nodes_[id].requires_grad;
  Node node{std::move(value), {}, {}, {}, needs, nullptr};
  if (needs) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw UsageError("loss belongs to a different graph");
  if (value(loss).size() != 1)
    throw UsageError("backward requires a scalar loss, got shape " + shape_str(value(loss).shape()));
  for (auto& n : nodes_) n.grad = Tensor();

  Node& root = nodes_[loss.id];
  if (root.requires_grad) root.grad = Tensor(root.value.shape(), 1.0);

  std::vector<Tensor*> grad_in;
  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (n.grad.empty() || !n.backward) continue;
    grad_in.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Node& in = nodes_[n.inputs[k]];
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad = Tensor(in.value.shape());
      grad_in[k] = &in.grad;
    }
    n.backward(n.value, n.grad, grad_in);
  }

  for (auto& n : nodes_) {
    if (!n.param) continue;
    n.param->grad = n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
  }
}

}  // namespace procan
