#include "procan/progrow.hpp"

#include "procan/errors.hpp"
#include "procan/network.hpp"
#include "procan/ops.hpp"

namespace procan {

std::string to_string(Blending b) {
  switch (b) {
    case Blending::None: return "none";
    case Blending::Scalar: return "scalar";
    case Blending::Bernoulli: return "bernoulli";
  }
  return "unknown";
}

Blending parse_blending(std::string_view name) {
  if (name == "none") return Blending::None;
  if (name == "scalar") return Blending::Scalar;
  if (name == "bernoulli") return Blending::Bernoulli;
  throw ConfigError("unknown blending strategy '" + std::string(name) + "'");
}

std::string to_string(GrowthPhase phase) {
  switch (phase) {
    case GrowthPhase::Start: return "start";
    case GrowthPhase::Transition: return "transition";
    case GrowthPhase::Final: return "final";
  }
  return "unknown";
}

GrowthState start_state(Blending strategy, std::size_t height, std::size_t width) {
  GrowthState s;
  s.strategy = strategy;
  s.height = height;
  s.width = width;
  if (strategy == Blending::Bernoulli) s.omega = Tensor({height, width}, 0.0);
  return s;
}

Tensor sample_mask(double p, std::size_t height, std::size_t width, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mask probability must lie in [0, 1], got " + std::to_string(p));
  Tensor mask({height, width});
  for (auto& v : mask.data()) v = rng.bernoulli(p) ? 1.0 : 0.0;
  return mask;
}

void advance(GrowthState& state, Rng& rng) {
  if (state.phase == GrowthPhase::Final) throw StateError("cannot advance a block that is already in its final phase");
  if (state.schedule.empty()) throw StateError("growth schedule is empty");
  state.p = state.schedule.front();
  state.schedule.erase(state.schedule.begin());
  if (state.p >= 1.0) {
    state.p = 1.0;
    state.phase = GrowthPhase::Final;
    state.schedule.clear();
    state.omega.reset();
    return;
  }
  state.phase = GrowthPhase::Transition;
  if (state.strategy == Blending::Bernoulli) state.omega = sample_mask(state.p, state.height, state.width, rng);
}

Var blend(Var previous, Var grown, const GrowthState& state) {
  if (previous.shape() != grown.shape())
    throw DimensionError("blend inputs differ: " + shape_str(previous.shape()) + " vs " + shape_str(grown.shape()));
  switch (state.phase) {
    case GrowthPhase::Start: return previous;
    case GrowthPhase::Final: return grown;
    case GrowthPhase::Transition: break;
  }
  switch (state.strategy) {
    case Blending::None: return grown;
    case Blending::Scalar: return lerp(grown, previous, state.p);
    case Blending::Bernoulli:
      if (!state.omega) throw StateError("bernoulli transition without a mask");
      return masked_select(grown, previous, *state.omega);
  }
  return grown;
}

void grow(Network& net, Blending strategy, Rng& rng) { net.grow(strategy, rng); }

}  // namespace procan
