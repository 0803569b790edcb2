#pragma once

#include <functional>
#include <vector>

#include "procan/autograd.hpp"
#include "procan/gradcheck.hpp"
#include "procan/ops.hpp"
#include "procan/rng.hpp"

namespace procan::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Reduces the builder's output to a scalar with fixed random weights of
/// magnitude in [0.5, 1.5] and random sign, then
/// compares the backward gradient of every input against central differences.
/// Returns the worst relative error over all inputs.
inline double gradcheck(const Builder& build, const std::vector<Tensor>& inputs, Rng& rng, double eps = 1e-5) {
  Tensor probe_weights;
  {
    Graph g(false);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.constant(t));
    probe_weights = random_tensor(build(g, vars).shape(), rng, 0.5, 1.5);
    for (auto& w : probe_weights.data())
      if (rng.bernoulli(0.5)) w = -w;
  }
  auto loss_of = [&](Graph& g, const std::vector<Var>& vars) {
    return sum(mul(build(g, vars), g.constant(probe_weights)));
  };

  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t));
  g.backward(loss_of(g, vars));

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor& x) {
      Graph fg(false);
      std::vector<Var> fv;
      for (std::size_t j = 0; j < inputs.size(); ++j) fv.push_back(fg.constant(j == k ? x : inputs[j]));
      return loss_of(fg, fv).value()[0];
    };
    const Tensor numeric = finite_diff_grad(f, inputs[k], eps);
    worst = std::max(worst, max_rel_error(g.grad(vars[k]), numeric));
  }
  return worst;
}

}  // namespace procan::testing
