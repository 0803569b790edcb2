#include "procan/network.hpp"

#include <cmath>

#include "procan/errors.hpp"
#include "procan/ops.hpp"

namespace procan {

namespace {

NetworkSpec plan(std::size_t in_channels, std::size_t in_size, const std::vector<std::size_t>& channels,
                 const std::vector<std::size_t>& strides, std::size_t budget, Variant variant, std::size_t c_bar) {
  NetworkSpec s;
  s.input_channels = in_channels;
  s.input_size = in_size;
  s.extended_budget = budget;
  std::size_t c = in_channels;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    s.base_blocks.push_back(CanBlockConfig{c, channels[i], std::min(c_bar, c), strides[i], variant});
    c = channels[i];
  }
  return s;
}

std::size_t conv_out(std::size_t size, std::size_t stride) { return (size - 1) / stride + 1; }

}  // namespace

NetworkSpec NetworkSpec::full(Variant variant, std::size_t c_bar) {
  return plan(32, 32, {32, 64, 128, 256}, {1, 2, 2, 1}, 3, variant, c_bar);
}

NetworkSpec NetworkSpec::desk(Variant variant, std::size_t c_bar) { return desk_with(4, 2, variant, c_bar); }

NetworkSpec NetworkSpec::desk_with(std::size_t base_count, std::size_t extended_budget, Variant variant,
                                   std::size_t c_bar) {
  if (base_count == 0) throw ConfigError("at least one base block is required");
  std::vector<std::size_t> channels{8, 16, 32, 32}, strides{1, 2, 2, 1};
  channels.resize(base_count, 32);
  strides.resize(base_count, 1);
  return plan(16, 16, channels, strides, extended_budget, variant, c_bar);
}

void NetworkSpec::validate() const {
  if (base_blocks.empty()) throw ConfigError("network needs at least one base block");
  if (input_channels == 0 || input_size == 0) throw ConfigError("network input must be non-empty");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
  std::size_t c = input_channels;
  for (std::size_t i = 0; i < base_blocks.size(); ++i) {
    base_blocks[i].validate();
    if (base_blocks[i].c_in != c)
      throw ConfigError("base block " + std::to_string(i + 1) + " expects " + std::to_string(base_blocks[i].c_in) +
                        " input channels but receives " + std::to_string(c));
    c = base_blocks[i].c_out;
  }
}

std::size_t NetworkSpec::feature_channels() const { return base_blocks.back().c_out; }

std::size_t NetworkSpec::feature_size() const {
  std::size_t s = input_size;
  for (const auto& b : base_blocks) s = conv_out(s, b.stride);
  return s;
}

CanBlockConfig NetworkSpec::extended_config() const {
  const CanBlockConfig& last = base_blocks.back();
  const std::size_t c = last.c_out;
  return CanBlockConfig{c, c, std::min(last.c_bar, c), 1, last.variant};
}

Network::Network(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& cfg : spec_.base_blocks) base_.emplace_back(cfg, rng);
  const std::size_t f = spec_.feature_channels();
  const double bound = 1.0 / std::sqrt(static_cast<double>(f));
  Tensor w({1, f}), b({1});
  for (auto& v : w.data()) v = rng.uniform(-bound, bound);
  b[0] = rng.uniform(-bound, bound);
  fc_weight_ = Parameter("fc.weight", std::move(w));
  fc_bias_ = Parameter("fc.bias", std::move(b));
}

Var Network::forward(Var x, Mode mode, const ForwardOptions& options) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] != spec_.input_channels || xs[2] != spec_.input_size || xs[3] != spec_.input_size)
    throw DimensionError("network expects [B×" + std::to_string(spec_.input_channels) + "×" +
                         std::to_string(spec_.input_size) + "×" + std::to_string(spec_.input_size) + "], got " +
                         shape_str(xs));
  Graph& g = *x.graph;
  auto note = [&](std::string layer, const Shape& in, const Shape& out) {
    if (options.shapes) options.shapes->push_back({std::move(layer), in, out});
  };

  Var h = x;
  for (std::size_t i = 0; i < base_.size(); ++i) {
    Var next = base_[i].forward(h, mode);
    note("Base CAN " + std::to_string(i + 1), h.shape(), next.shape());
    h = next;
  }
  for (std::size_t i = 0; i < extended_.size(); ++i) {
    ExtendedBlock& ext = extended_[i];
    GrowthState& st = ext.state;
    if (mode == Mode::Train && options.mask_rng && st.phase == GrowthPhase::Transition &&
        st.strategy == Blending::Bernoulli)
      st.omega = sample_mask(st.p, st.height, st.width, *options.mask_rng);
    Var next = st.phase == GrowthPhase::Start ? h : blend(h, ext.block.forward(h, mode), st);
    note("Extended CAN " + std::to_string(i + 1), h.shape(), next.shape());
    h = next;
  }

  Var pooled = global_avg_pool(h);
  note("GAP", h.shape(), Shape{h.shape()[0], h.shape()[1], 1, 1});
  if (mode == Mode::Train && spec_.dropout_p > 0.0) {
    if (!options.dropout_rng) throw UsageError("train-mode forward needs a dropout generator");
    pooled = dropout(pooled, spec_.dropout_p, mode, *options.dropout_rng);
  }
  Var logits = linear(pooled, g.param(fc_weight_), g.param(fc_bias_));
  note("Fully-Connected", Shape{xs[0], spec_.feature_channels(), 1, 1}, logits.shape());
  return reshape(logits, {xs[0]});
}

Tensor Network::logits(const Tensor& batch) {
  Graph g(false);
  return forward(g.constant(batch), Mode::Eval).value();
}

Tensor Network::predict_proba(const Tensor& batch) {
  Tensor z = logits(batch);
  for (auto& v : z.data()) v = stable_sigmoid(v);
  return z;
}

void Network::grow(Blending strategy, Rng& rng) {
  if (extended_.size() >= spec_.extended_budget)
    throw StateError("extended block budget of " + std::to_string(spec_.extended_budget) + " is exhausted");
  const std::size_t s = spec_.feature_size();
  extended_.push_back(ExtendedBlock{CanBlock(spec_.extended_config(), rng), start_state(strategy, s, s)});
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : base_)
    for (Parameter* p : b.parameters()) out.push_back(p);
  out.push_back(&fc_weight_);
  out.push_back(&fc_bias_);
  for (auto& e : extended_)
    for (Parameter* p : e.block.parameters()) out.push_back(p);
  return out;
}

std::vector<double> Network::weight_decays(double fc_decay) {
  std::vector<double> out;
  for (Parameter* p : parameters()) out.push_back(p == &fc_weight_ || p == &fc_bias_ ? fc_decay : 0.0);
  return out;
}

std::size_t Network::param_count() const {
  std::size_t total = fc_weight_.value.size() + fc_bias_.value.size();
  for (const auto& b : base_) total += b.param_count();
  for (const auto& e : extended_) total += e.block.param_count();
  return total;
}

}  // namespace procan
