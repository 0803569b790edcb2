#include "procan/optim.hpp"

#include <cmath>

#include "procan/errors.hpp"

namespace procan {

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, std::span<const double> weight_decay) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay.size() != params.size())
    throw DimensionError("adam_step: " + std::to_string(weight_decay.size()) + " decay values for " +
                         std::to_string(params.size()) + " parameters");
  if (state.slots.size() > params.size()) throw DimensionError("adam_step: optimizer state has more slots than parameters");
  while (state.slots.size() < params.size()) {
    const Parameter& p = *params[state.slots.size()];
    state.slots.push_back(AdamSlot{Tensor(p.value.shape()), Tensor(p.value.shape()), 0});
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    AdamSlot& slot = state.slots[k];
    if (p.grad.shape() != p.value.shape() || slot.m.shape() != p.value.shape())
      throw DimensionError("adam_step: parameter '" + p.name + "' " + shape_str(p.value.shape()) +
                           " does not match its gradient or moments");
    ++slot.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(slot.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(slot.step));
    const double decay = weight_decay[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + decay * p.value[i];
      slot.m[i] = state.beta1 * slot.m[i] + (1.0 - state.beta1) * g;
      slot.v[i] = state.beta2 * slot.v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace procan
