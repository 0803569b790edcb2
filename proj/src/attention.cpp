#include "procan/attention.hpp"

#include <cmath>

#include "procan/errors.hpp"

namespace procan {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::CAN: return "can";
    case Variant::NonLocal: return "nonlocal";
    case Variant::NonLocalSE: return "nonlocal_se";
    case Variant::DualAttention: return "dual_attention";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "can" || name == "CAN") return Variant::CAN;
  if (name == "nonlocal" || name == "NonLocal") return Variant::NonLocal;
  if (name == "nonlocal_se" || name == "NonLocalSE") return Variant::NonLocalSE;
  if (name == "dual_attention" || name == "DualAttention") return Variant::DualAttention;
  throw ConfigError("unknown attention variant '" + std::string(name) + "'");
}

void CanBlockConfig::validate() const {
  if (c_in == 0 || c_out == 0) throw ConfigError("block channel counts must be positive");
  if (c_bar < 1 || c_bar > c_in)
    throw ConfigError("c_bar must lie in [1, c_in=" + std::to_string(c_in) + "], got " + std::to_string(c_bar));
  if (stride != 1 && stride != 2) throw ConfigError("block stride must be 1 or 2, got " + std::to_string(stride));
}

namespace {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

CanBlockParams CanBlockParams::init(const CanBlockConfig& c, Rng& rng) {
  c.validate();
  const std::size_t hidden = c.se_hidden();
  CanBlockParams p{
      Parameter("mq", kaiming_uniform({c.c_bar, c.c_in}, c.c_in, rng)),
      Parameter("mk", kaiming_uniform({c.c_bar, c.c_in}, c.c_in, rng)),
      Parameter("mv", kaiming_uniform({c.c_in, c.c_in}, c.c_in, rng)),
      Parameter("me", Tensor({c.c_in}, 0.0)),
      Parameter("mo", kaiming_uniform({c.c_out, c.c_in, 3, 3}, c.c_in * 9, rng)),
      Parameter("bn_scale", Tensor({c.c_out}, 1.0)),
      Parameter("bn_shift", Tensor({c.c_out}, 0.0)),
      Parameter("se_reduce", kaiming_uniform({hidden, c.c_in}, c.c_in, rng)),
      Parameter("se_expand", kaiming_uniform({c.c_in, hidden}, hidden, rng)),
      BatchNormState(c.c_out),
  };
  return p;
}

Var nonlocal_core(Var x, Var mq, Var mk, Var mv, BlockTrace* trace) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw DimensionError("nonlocal_core expects [B×C×N], got " + shape_str(xs));
  const std::size_t batch = xs[0], c = xs[1], n = xs[2];
  if (mq.shape().size() != 2 || mq.shape()[1] != c || mk.shape() != mq.shape() || mv.shape() != Shape{c, c})
    throw DimensionError("nonlocal_core: projections " + shape_str(mq.shape()) + ", " + shape_str(mk.shape()) + ", " +
                         shape_str(mv.shape()) + " do not match " + std::to_string(c) + " input channels");
  const std::size_t c_bar = mq.shape()[0];

  // 1×1 convolutions over the flattened positions.
  Var x4 = reshape(x, {batch, c, 1, n});
  Var q = reshape(conv2d(x4, reshape(mq, {c_bar, c, 1, 1}), 1, 0), {batch, c_bar, n});
  Var k = reshape(conv2d(x4, reshape(mk, {c_bar, c, 1, 1}), 1, 0), {batch, c_bar, n});
  Var v = reshape(conv2d(x4, reshape(mv, {c, c, 1, 1}), 1, 0), {batch, c, n});

  Var scores = bmm(transpose_last2(q), k);  // [B×N×N], S_ij = Q_iz K_zj
  Var map = softmax_rows(scores);
  Var attended = attend(v, map);  // A_cj = V_ci B_ij
  if (trace) {
    trace->q = q;
    trace->k = k;
    trace->v = v;
    trace->scores = scores;
    trace->spatial_map = map;
    trace->attended = attended;
  }
  return attended;
}

Var channel_gate(Var x, Var me, BlockTrace* trace) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw DimensionError("channel_gate expects [B×C×N], got " + shape_str(xs));
  const std::size_t batch = xs[0], c = xs[1], n = xs[2];
  if (me.shape() != Shape{c})
    throw DimensionError("channel_gate: vector " + shape_str(me.shape()) + " does not match " + std::to_string(c) +
                         " channels");
  Var e = conv2d(reshape(x, {batch, c, 1, n}), reshape(me, {1, c, 1, 1}), 1, 0);  // [B×1×1×N]
  Var logits = bmm(x, reshape(e, {batch, n, 1}));                                // [B×C×1]
  Var g = sigmoid(logits);
  if (trace) {
    trace->e = reshape(e, {batch, n});
    trace->gate = g;
    trace->channel_map = g;
  }
  return g;
}

namespace {

Var squeeze_excite_gate(Var a, CanBlockParams& p, std::size_t batch, std::size_t c, std::size_t n) {
  Graph& g = *a.graph;
  Var pooled = global_avg_pool(reshape(a, {batch, c, 1, n}));  // [B×C]
  Var hidden = relu(linear(pooled, g.param(p.se_reduce)));
  Var gate = sigmoid(linear(hidden, g.param(p.se_expand)));
  return reshape(gate, {batch, c, 1});
}

}  // namespace

CanBlock::CanBlock(CanBlockConfig config, Rng& rng) : config_(config), params_(CanBlockParams::init(config, rng)) {}

CanBlock::CanBlock(CanBlockConfig config, CanBlockParams params) : config_(config), params_(std::move(params)) {
  config_.validate();
}

Var CanBlock::forward(Var x, Mode mode, BlockTrace* trace, BlockProbe probe) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] != config_.c_in)
    throw DimensionError("block expects [B×" + std::to_string(config_.c_in) + "×H×W], got " + shape_str(xs));
  Graph& g = *x.graph;
  const std::size_t batch = xs[0], c = xs[1], h = xs[2], w = xs[3], n = h * w;
  CanBlockParams& p = params_;

  Var flat = reshape(x, {batch, c, n});
  Var attended = nonlocal_core(flat, g.param(p.mq), g.param(p.mk), g.param(p.mv), trace);

  Var psi;
  switch (config_.variant) {
    case Variant::CAN: {
      Var gate = channel_gate(flat, g.param(p.me), trace);
      Var gated = probe.gate_to_one ? attended : scale_rows(attended, gate);
      psi = add(gated, flat);
      break;
    }
    case Variant::NonLocal:
      psi = add(attended, flat);
      break;
    case Variant::NonLocalSE: {
      Var gate = squeeze_excite_gate(attended, p, batch, c, n);
      if (trace) trace->gate = trace->channel_map = gate;
      Var gated = probe.gate_to_one ? attended : scale_rows(attended, gate);
      psi = add(gated, flat);
      break;
    }
    case Variant::DualAttention: {
      // Independent channel branch: C×C affinity of the raw features.
      Var affinity = softmax_rows(bmm(flat, transpose_last2(flat)));
      Var channel_out = bmm(affinity, flat);
      if (trace) trace->channel_map = affinity;
      psi = add(add(attended, flat), add(channel_out, flat));
      break;
    }
  }

  Var psi4 = reshape(psi, {batch, c, h, w});
  Var conv = conv2d(psi4, g.param(p.mo), config_.stride, 1);
  Var normed = probe.skip_norm ? conv : batchnorm2d(conv, g.param(p.bn_scale), g.param(p.bn_shift), p.bn, mode);
  Var out = relu(normed);
  if (trace) {
    trace->psi = psi;
    trace->conv = conv;
    trace->out = out;
  }
  return out;
}

std::vector<Parameter*> CanBlock::parameters() {
  CanBlockParams& p = params_;
  std::vector<Parameter*> out{&p.mq, &p.mk, &p.mv};
  if (config_.variant == Variant::CAN) out.push_back(&p.me);
  if (config_.variant == Variant::NonLocalSE) {
    out.push_back(&p.se_reduce);
    out.push_back(&p.se_expand);
  }
  out.insert(out.end(), {&p.mo, &p.bn_scale, &p.bn_shift});
  return out;
}

std::vector<const Parameter*> CanBlock::parameters() const {
  auto mut = const_cast<CanBlock*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t CanBlock::param_count() const {
  std::size_t total = 0;
  for (const Parameter* p : parameters()) total += p->value.size();
  return total;
}

AttentionShapeSummary shape_summary(const CanBlockConfig& config, std::size_t n) {
  config.validate();
  const std::size_t cin = config.c_in, cout = config.c_out, cbar = config.c_bar;
  AttentionShapeSummary s;
  s.spatial_attention_shape = std::pair{n, n};
  std::size_t count = 2 * cbar * cin + cin * cin + cout * cin * 9 + 2 * cout;
  switch (config.variant) {
    case Variant::CAN:
      s.channel_attention_shape = std::pair{cin, std::size_t{1}};
      s.matrix_multiply_count = 2;
      s.chains_dependent = true;
      s.mechanism = "Two Dependent MM";
      s.permutation_equivariant = false;
      count += cin;
      break;
    case Variant::NonLocal:
      s.matrix_multiply_count = 1;
      s.mechanism = "MM";
      s.permutation_equivariant = true;
      break;
    case Variant::NonLocalSE:
      s.channel_attention_shape = std::pair{cin, std::size_t{1}};
      s.matrix_multiply_count = 1;
      s.mechanism = "MM, GAP and FC";
      s.permutation_equivariant = false;
      count += 2 * config.se_hidden() * cin;
      break;
    case Variant::DualAttention:
      s.channel_attention_shape = std::pair{cin, cin};
      s.matrix_multiply_count = 2;
      s.mechanism = "Two Independent MM";
      s.permutation_equivariant = true;
      break;
  }
  s.parameter_count = count;
  return s;
}

}  // namespace procan
