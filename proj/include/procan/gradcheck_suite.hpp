#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "procan/autograd.hpp"
#include "procan/network.hpp"
#include "procan/rng.hpp"

namespace procan {

using OpBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Reduces the op output to a scalar with fixed random weights (magnitude in
/// [0.5, 1.5], random sign) and compares the backward gradient of every input
/// with central differences. Returns the worst relative error.
double op_gradient_error(const OpBuilder& build, const std::vector<Tensor>& inputs, Rng& rng, double eps = 1e-5);

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // number of gradient coordinates compared
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double worst() const;
};

/// Every differentiable op over `seeds` random draws of small shapes.
GradcheckReport op_gradient_suite(std::size_t seeds = 20, std::uint64_t seed = 1);

/// Train-mode BCE loss of a freshly initialised network on a random batch of
/// two samples (one per class); every parameter coordinate is compared with
/// central differences. Dropout uses a fixed mask.
GradcheckEntry network_gradient_check(const NetworkSpec& spec, std::uint64_t seed, double eps = 1e-5);

}  // namespace procan
