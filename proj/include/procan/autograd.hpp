#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <deque>
#include <unordered_map>
#include <vector>

#include "procan/tensor.hpp"

namespace procan {

/// A learnable tensor together with the gradient written by the last backward pass.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

class Graph;

/// Handle to a node recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Receives the op's output value, its gradient, and the (possibly null)
/// gradient buffers of the inputs, which it accumulates into.
using BackwardFn = std::function<void(const Tensor& out, const Tensor& grad_out, std::vector<Tensor*>& grad_in)>;

/// Tape for reverse-mode differentiation. Nodes are appended in evaluation order,
/// so the node list is already topologically sorted.
class Graph {
 public:
  /// With gradients disabled nothing is saved for backward; used for inference.
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value);
  /// Leaf that receives a gradient; readable with grad() after backward.
  Var input(Tensor value);
  /// Binds a parameter. Binding the same parameter twice returns the same node.
  Var param(Parameter& p);

  /// Records an op output. `backward` may be empty if no input needs a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

  /// Gradient of the last backward's loss w.r.t. v (zeros if unreached).
  Tensor grad(Var v) const;

  /// Reverse accumulation from a scalar loss. Every bound parameter's `grad` is
  /// overwritten: with its gradient if reached, with zeros otherwise.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  std::deque<Node> nodes_;  // deque: references to values stay valid as nodes are appended
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool grad_enabled_;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

}  // namespace procan
