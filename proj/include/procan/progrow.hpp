#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "procan/autograd.hpp"
#include "procan/rng.hpp"
#include "procan/tensor.hpp"

namespace procan {

/// How a freshly grown block is faded in.
///   None:      the new block's output replaces the old features outright.
///   Scalar:    convex combination p·new + (1−p)·old.
///   Bernoulli: each pixel is routed wholly through new or old with P(new)=p.
enum class Blending { None, Scalar, Bernoulli };

std::string to_string(Blending b);
Blending parse_blending(std::string_view name);

enum class GrowthPhase { Start, Transition, Final };

std::string to_string(GrowthPhase phase);

struct GrowthState {
  GrowthPhase phase = GrowthPhase::Start;
  double p = 0.0;
  std::optional<Tensor> omega;  // [H×W] of {0,1}, bernoulli only
  Blending strategy = Blending::Bernoulli;
  std::vector<double> schedule{0.25, 0.5, 0.75, 1.0};
  std::size_t height = 1;
  std::size_t width = 1;
};

/// A state at p=0 for a block whose output is h×w. Under the bernoulli
/// strategy the mask starts as all zeros.
GrowthState start_state(Blending strategy, std::size_t height, std::size_t width);

/// i.i.d. {0,1} entries with P(1)=p.
Tensor sample_mask(double p, std::size_t height, std::size_t width, Rng& rng);

/// Moves to the next p of the schedule. Bernoulli masks are redrawn; reaching
/// p=1 enters the final phase and drops the mask.
void advance(GrowthState& state, Rng& rng);

/// Combines the previous features with the new block's output according to
/// the state. The start state passes `previous` through for every strategy;
/// the final state passes `grown` through.
Var blend(Var previous, Var grown, const GrowthState& state);

}  // namespace procan
