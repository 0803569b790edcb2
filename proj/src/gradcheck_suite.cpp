#include "procan/gradcheck_suite.hpp"

#include <algorithm>

#include "procan/gradcheck.hpp"
#include "procan/ops.hpp"

namespace procan {

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor binary_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return t;
}

}  // namespace

double op_gradient_error(const OpBuilder& build, const std::vector<Tensor>& inputs, Rng& rng, double eps) {
  Tensor weights;
  {
    Graph g(false);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.constant(t));
    weights = uniform_tensor(build(g, vars).shape(), rng, 0.5, 1.5);
    for (auto& w : weights.data())
      if (rng.bernoulli(0.5)) w = -w;
  }
  auto loss_of = [&](Graph& g, const std::vector<Var>& vars) { return sum(mul(build(g, vars), g.constant(weights))); };

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
    worst = std::max(worst, max_rel_error(g.grad(vars[k]), finite_diff_grad(f, inputs[k], eps)));
  }
  return worst;
}

double GradcheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

GradcheckReport op_gradient_suite(std::size_t seeds, std::uint64_t seed) {
  Rng rng(seed);
  GradcheckReport report;
  auto run = [&](const std::string& name, const OpBuilder& build, const std::vector<Tensor>& inputs) {
    const double err = op_gradient_error(build, inputs, rng);
    std::size_t n = 0;
    for (const auto& t : inputs) n += t.size();
    auto it = std::find_if(report.entries.begin(), report.entries.end(), [&](const auto& e) { return e.name == name; });
    if (it == report.entries.end()) {
      report.entries.push_back({name, err, n});
    } else {
      it->max_rel_error = std::max(it->max_rel_error, err);
      it->checked += n;
    }
  };
  using V = const std::vector<Var>&;
  for (std::size_t s = 0; s < seeds; ++s) {
    run("add", [](Graph&, V v) { return add(v[0], v[1]); }, {uniform_tensor({3, 4}, rng), uniform_tensor({3, 4}, rng)});
    run("mul", [](Graph&, V v) { return mul(v[0], v[1]); }, {uniform_tensor({3, 4}, rng), uniform_tensor({3, 4}, rng)});
    run("scale", [](Graph&, V v) { return scale(v[0], -1.7); }, {uniform_tensor({5}, rng)});
    run("mean", [](Graph&, V v) { return mean(v[0]); }, {uniform_tensor({2, 3}, rng)});
    run("matmul", [](Graph&, V v) { return matmul(v[0], v[1]); }, {uniform_tensor({4, 5}, rng), uniform_tensor({5, 6}, rng)});
    run("bmm", [](Graph&, V v) { return bmm(v[0], v[1]); }, {uniform_tensor({2, 3, 4}, rng), uniform_tensor({2, 4, 2}, rng)});
    run("attend", [](Graph&, V v) { return attend(v[0], v[1]); },
        {uniform_tensor({2, 3, 4}, rng), uniform_tensor({2, 4, 4}, rng)});
    const std::size_t stride = 1 + s % 2;
    run("conv2d 3x3", [stride](Graph&, V v) { return conv2d(v[0], v[1], stride, 1); },
        {uniform_tensor({2, 2, 5, 5}, rng), uniform_tensor({3, 2, 3, 3}, rng)});
    run("conv2d 1x1", [](Graph&, V v) { return conv2d(v[0], v[1], 1, 0); },
        {uniform_tensor({1, 3, 1, 6}, rng), uniform_tensor({2, 3, 1, 1}, rng)});
    run("softmax_rows", [](Graph&, V v) { return softmax_rows(v[0]); }, {uniform_tensor({5, 5}, rng, -3, 3)});
    run("sigmoid", [](Graph&, V v) { return sigmoid(v[0]); }, {uniform_tensor({7}, rng, -4, 4)});
    run("relu", [](Graph&, V v) { return relu(v[0]); }, {uniform_tensor({7}, rng, -4, 4)});
    run("scale_rows", [](Graph&, V v) { return scale_rows(v[0], v[1]); },
        {uniform_tensor({2, 3, 4}, rng), uniform_tensor({2, 3, 1}, rng)});
    run("batchnorm2d train",
        [](Graph&, V v) {
          BatchNormState st(2);
          return batchnorm2d(v[0], v[1], v[2], st, Mode::Train);
        },
        {uniform_tensor({4, 2, 3, 3}, rng), uniform_tensor({2}, rng, 0.5, 2), uniform_tensor({2}, rng)});
    run("batchnorm2d eval",
        [](Graph&, V v) {
          BatchNormState st(2);
          st.running_mean = Tensor::from({0.3, -0.2});
          st.running_var = Tensor::from({2.0, 0.5});
          return batchnorm2d(v[0], v[1], v[2], st, Mode::Eval);
        },
        {uniform_tensor({1, 2, 2, 2}, rng), uniform_tensor({2}, rng), uniform_tensor({2}, rng)});
    run("global_avg_pool", [](Graph&, V v) { return global_avg_pool(v[0]); }, {uniform_tensor({2, 3, 2, 3}, rng)});
    const std::uint64_t dseed = rng.next_u64();
    run("dropout",
        [dseed](Graph&, V v) {
          Rng r(dseed);
          return dropout(v[0], 0.5, Mode::Train, r);
        },
        {uniform_tensor({3, 4}, rng)});
    run("linear", [](Graph&, V v) { return linear(v[0], v[1], v[2]); },
        {uniform_tensor({3, 4}, rng), uniform_tensor({2, 4}, rng), uniform_tensor({2}, rng)});
    const Tensor mask = binary_tensor({3, 3}, rng);
    run("masked_select", [mask](Graph&, V v) { return masked_select(v[0], v[1], mask); },
        {uniform_tensor({2, 2, 3, 3}, rng), uniform_tensor({2, 2, 3, 3}, rng)});
    run("lerp", [](Graph&, V v) { return lerp(v[0], v[1], 0.25); }, {uniform_tensor({2, 5}, rng), uniform_tensor({2, 5}, rng)});
    run("transpose_last2", [](Graph&, V v) { return transpose_last2(v[0]); }, {uniform_tensor({2, 3, 4}, rng)});
    run("reshape", [](Graph&, V v) { return reshape(v[0], {4, 3}); }, {uniform_tensor({2, 6}, rng)});
    const Tensor labels = binary_tensor({6}, rng);
    run("bce_loss", [labels](Graph&, V v) { return bce_loss(v[0], labels); }, {uniform_tensor({6}, rng, -3, 3)});
  }
  return report;
}

GradcheckEntry network_gradient_check(const NetworkSpec& spec, std::uint64_t seed, double eps) {
  Rng rng(seed);
  Network net(spec, rng);
  // Small non-zero gate vectors: the gate is no longer constant, yet its
  // sigmoid stays away from saturation.
  for (CanBlock& b : net.base())
    for (auto& v : b.params().me.value.data()) v = rng.uniform(-0.05, 0.05);
  const Tensor x = uniform_tensor({2, spec.input_channels, spec.input_size, spec.input_size}, rng, -1.5, 1.5);
  const Tensor labels = Tensor::from({0.0, 1.0});
  const std::uint64_t dropout_seed = rng.next_u64();

  auto loss_of = [&](Graph&, Var input) {
    Rng drop(dropout_seed);
    ForwardOptions opts;
    opts.dropout_rng = &drop;
    return bce_loss(net.forward(input, Mode::Train, opts), labels);
  };

  Graph g;
  g.backward(loss_of(g, g.constant(x)));

  GradcheckEntry entry{"network", 0.0, 0};
  auto value_at = [&](const Tensor& input) {
    Graph fg(false);
    return loss_of(fg, fg.constant(input)).value()[0];
  };
  for (Parameter* p : net.parameters()) {
    const Tensor analytic = p->grad;
    const Tensor saved = p->value;
    const Tensor numeric = finite_diff_grad(
        [&](const Tensor& w) {
          p->value = w;
          const double r = value_at(x);
          p->value = saved;
          return r;
        },
        saved, eps);
    entry.max_rel_error = std::max(entry.max_rel_error, max_rel_error(analytic, numeric));
    entry.checked += saved.size();
  }
  return entry;
}

}  // namespace procan
