#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "procan/attention.hpp"
#include "procan/progrow.hpp"

namespace procan {

struct LayerShape {
  std::string layer;
  Shape input;
  Shape output;
};

/// Layer plan of the classifier. The input is a cube whose depth axis is read as
/// channels, so the first block takes `input_channels` maps of
/// `input_size`×`input_size` pixels.
struct NetworkSpec {
  std::size_t input_channels = 32;
  std::size_t input_size = 32;
  std::vector<CanBlockConfig> base_blocks;
  std::size_t extended_budget = 3;
  double dropout_p = 0.5;

  /// Four base blocks 32→32→64→128→256 with strides 1,2,2,1 on 32³ input, T=3.
  static NetworkSpec full(Variant variant = Variant::CAN, std::size_t c_bar = 1);
  /// 16³ input, channels 8/16/32/32 with strides 1,2,2,1, T=2.
  static NetworkSpec desk(Variant variant = Variant::CAN, std::size_t c_bar = 1);
  /// Desk plan with a different number of base blocks. Blocks beyond the fourth
  /// keep 32 channels at stride 1; fewer blocks truncate the plan.
  static NetworkSpec desk_with(std::size_t base_count, std::size_t extended_budget, Variant variant = Variant::CAN,
                               std::size_t c_bar = 1);

  void validate() const;
  /// Channel count and spatial size leaving the last base block.
  std::size_t feature_channels() const;
  std::size_t feature_size() const;
  /// Config of a shape-preserving extended block.
  CanBlockConfig extended_config() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ExtendedBlock {
  CanBlock block;
  GrowthState state;
};

struct ForwardOptions {
  Rng* dropout_rng = nullptr;  // required in train mode when dropout is active
  Rng* mask_rng = nullptr;     // train mode: redraw bernoulli masks every pass
  std::vector<LayerShape>* shapes = nullptr;
};

class Network {
 public:
  Network(NetworkSpec spec, Rng& rng);

  const NetworkSpec& spec() const { return spec_; }

  /// x: [B×C×S×S] -> logits [B].
  Var forward(Var x, Mode mode, const ForwardOptions& options = {});
  /// Eval-mode logits of a batch, without recording gradients.
  Tensor logits(const Tensor& batch);
  /// Eval-mode probabilities in (0, 1).
  Tensor predict_proba(const Tensor& batch);

  /// Appends a fresh shape-preserving block in its start state.
  void grow(Blending strategy, Rng& rng);

  std::vector<CanBlock>& base() { return base_; }
  const std::vector<CanBlock>& base() const { return base_; }
  std::vector<ExtendedBlock>& extended() { return extended_; }
  const std::vector<ExtendedBlock>& extended() const { return extended_; }
  Parameter& fc_weight() { return fc_weight_; }
  Parameter& fc_bias() { return fc_bias_; }
  const Parameter& fc_weight() const { return fc_weight_; }
  const Parameter& fc_bias() const { return fc_bias_; }

  /// Base blocks, then the head, then grown blocks in growth order. New
  /// parameters are always appended, so optimizer slots stay aligned.
  std::vector<Parameter*> parameters();
  /// Decay coefficient per entry of parameters(): `fc_decay` on the head, 0 elsewhere.
  std::vector<double> weight_decays(double fc_decay);
  /// Learnable scalars, running statistics excluded.
  std::size_t param_count() const;

 private:
  NetworkSpec spec_;
  std::vector<CanBlock> base_;
  std::vector<ExtendedBlock> extended_;
  Parameter fc_weight_;  // [1 × F]
  Parameter fc_bias_;    // [1]
};

/// Progressive growing entry point; fails once the extended budget is used up.
void grow(Network& net, Blending strategy, Rng& rng);

}  // namespace procan
