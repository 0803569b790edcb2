#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "procan/autograd.hpp"
#include "procan/ops.hpp"
#include "procan/rng.hpp"

namespace procan {

/// Attention design inside a block. CAN is the channel-attentive non-local block;
/// the others are the comparison designs it is ablated against.
enum class Variant { CAN, NonLocal, NonLocalSE, DualAttention };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

struct CanBlockConfig {
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t c_bar = 1;  // channels of the query/key projections
  std::size_t stride = 1;
  Variant variant = Variant::CAN;

  void validate() const;
  /// Hidden width of the squeeze-excitation bottleneck (ratio 4, at least 1).
  std::size_t se_hidden() const { return c_in / 4 > 0 ? c_in / 4 : 1; }

  friend bool operator==(const CanBlockConfig&, const CanBlockConfig&) = default;
};

/// Learnable tensors of one block plus its batch-norm running statistics.
/// `me` is used by CAN only; `se_reduce`/`se_expand` by NonLocalSE only.
struct CanBlockParams {
  Parameter mq;        // [c_bar × c_in]
  Parameter mk;        // [c_bar × c_in]
  Parameter mv;        // [c_in × c_in]
  Parameter me;        // [c_in]
  Parameter mo;        // [c_out × c_in × 3 × 3]
  Parameter bn_scale;  // [c_out]
  Parameter bn_shift;  // [c_out]
  Parameter se_reduce;  // [hidden × c_in]
  Parameter se_expand;  // [c_in × hidden]
  BatchNormState bn;

  /// Kaiming-uniform projections and kernel, zero `me` (neutral gate of 0.5),
  /// unit scale and zero shift for the norm.
  static CanBlockParams init(const CanBlockConfig& config, Rng& rng);
};

/// Intermediate values of one forward pass, for inspection in tests and tools.
struct BlockTrace {
  std::optional<Var> q, k, v, scores, spatial_map, attended;
  std::optional<Var> e, gate, channel_map;
  std::optional<Var> psi, conv, out;
};

/// Overrides used by equivalence checks between designs.
struct BlockProbe {
  bool gate_to_one = false;
  bool skip_norm = false;
};

/// Spatial attention core: projections, row-softmax attention map, and the
/// attended values A = V·B. x: [B×Cin×N] -> [B×Cin×N].
Var nonlocal_core(Var x, Var mq, Var mk, Var mv, BlockTrace* trace = nullptr);

/// Channel gate g_c = sigmoid(Σ_j X_cj e_j), e_j = Σ_c me_c X_cj. x: [B×Cin×N] -> [B×Cin×1].
Var channel_gate(Var x, Var me, BlockTrace* trace = nullptr);

class CanBlock {
 public:
  CanBlock(CanBlockConfig config, Rng& rng);
  CanBlock(CanBlockConfig config, CanBlockParams params);

  /// x: [B×Cin×H×W] -> [B×Cout×H'×W'] for the configured variant.
  Var forward(Var x, Mode mode, BlockTrace* trace = nullptr, BlockProbe probe = {});

  const CanBlockConfig& config() const { return config_; }
  CanBlockParams& params() { return params_; }
  const CanBlockParams& params() const { return params_; }

  /// Learnable parameters actually used by the variant (running stats excluded).
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t param_count() const;

 private:
  CanBlockConfig config_;
  CanBlockParams params_;
};

struct AttentionShapeSummary {
  std::optional<std::pair<std::size_t, std::size_t>> spatial_attention_shape;
  std::optional<std::pair<std::size_t, std::size_t>> channel_attention_shape;
  std::size_t matrix_multiply_count = 0;  // attention chains built from matrix products
  bool chains_dependent = false;
  std::string mechanism;
  bool permutation_equivariant = false;
  std::size_t parameter_count = 0;
};

/// Closed-form shape and parameter accounting for a block attending over n positions.
AttentionShapeSummary shape_summary(const CanBlockConfig& config, std::size_t n);

}  // namespace procan
