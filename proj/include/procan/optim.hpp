#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "procan/autograd.hpp"

namespace procan {

struct AdamSlot {
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;
};

/// Adam moments, one slot per parameter in registration order. Parameters added
/// later (e.g. grown blocks) get fresh slots with their own step counters.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<AdamSlot> slots;
};

/// One Adam update with bias correction. Weight decay enters as an added
/// gradient term λ·w before the moment updates (coupled L2).
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, std::span<const double> weight_decay);

}  // namespace procan
