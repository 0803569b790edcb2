#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "procan/checkpoint.hpp"
#include "procan/errors.hpp"
#include "procan/gradcheck_suite.hpp"
#include "procan/network.hpp"
#include "procan/ops.hpp"
#include "test_util.hpp"

using namespace procan;
using procan::testing::random_tensor;

namespace {

// Learnable scalars of one block, counted from its configuration alone.
std::size_t block_scalars(const CanBlockConfig& c) {
  std::size_t n = c.c_bar * c.c_in + c.c_bar * c.c_in + c.c_in * c.c_in + c.c_out * c.c_in * 3 * 3 + c.c_out + c.c_out;
  if (c.variant == Variant::CAN) n += c.c_in;
  if (c.variant == Variant::NonLocalSE) n += 2 * std::max<std::size_t>(1, c.c_in / 4) * c.c_in;
  return n;
}

NetworkSpec tiny_spec() {
  NetworkSpec s;
  s.input_channels = 3;
  s.input_size = 5;
  s.base_blocks = {CanBlockConfig{3, 4, 1, 1, Variant::CAN}, CanBlockConfig{4, 4, 2, 2, Variant::CAN}};
  s.extended_budget = 1;
  return s;
}

}  // namespace

TEST_CASE("full architecture shapes") {
  Rng rng(1);
  Network net(NetworkSpec::full(), rng);
  std::vector<LayerShape> shapes;
  Graph g(false);
  ForwardOptions opts;
  opts.shapes = &shapes;
  Var z = net.forward(g.constant(random_tensor({1, 32, 32, 32}, rng)), Mode::Eval, opts);
  CHECK(z.shape() == Shape{1});
  const std::vector<LayerShape> expected{
      {"Base CAN 1", {1, 32, 32, 32}, {1, 32, 32, 32}}, {"Base CAN 2", {1, 32, 32, 32}, {1, 64, 16, 16}},
      {"Base CAN 3", {1, 64, 16, 16}, {1, 128, 8, 8}},  {"Base CAN 4", {1, 128, 8, 8}, {1, 256, 8, 8}},
      {"GAP", {1, 256, 8, 8}, {1, 256, 1, 1}},          {"Fully-Connected", {1, 256, 1, 1}, {1, 1}},
  };
  REQUIRE(shapes.size() == expected.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    CHECK(shapes[i].layer == expected[i].layer);
    CHECK(shapes[i].input == expected[i].input);
    CHECK(shapes[i].output == expected[i].output);
    if (i + 1 < shapes.size()) CHECK(shapes[i].output == shapes[i + 1].input);
  }
}

TEST_CASE("spec validation") {
  NetworkSpec s = NetworkSpec::desk();
  CHECK_NOTHROW(s.validate());
  CHECK(s.feature_channels() == 32);
  CHECK(s.feature_size() == 4);
  s.base_blocks[2].c_in = 8;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  Rng rng(2);
  CHECK_THROWS_AS(Network(s, rng), ConfigError);
  NetworkSpec d = NetworkSpec::desk();
  d.dropout_p = 1.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK_THROWS_AS(NetworkSpec::desk_with(0, 1), ConfigError);
  CHECK(NetworkSpec::desk_with(6, 1).base_blocks.size() == 6);
  CHECK(NetworkSpec::desk_with(3, 1).feature_channels() == 32);
}

TEST_CASE("desk network forward") {
  Rng rng(3);
  Network net(NetworkSpec::desk(), rng);
  const Tensor x = random_tensor({4, 16, 16, 16}, rng);
  const Tensor a = net.logits(x);
  CHECK(a.shape() == Shape{4});
  CHECK(a.all_finite());
  CHECK(net.logits(x) == a);

  // Dropout only acts in train mode.
  Rng d1(1), d2(2);
  ForwardOptions o1, o2;
  o1.dropout_rng = &d1;
  o2.dropout_rng = &d2;
  Graph g(false);
  CHECK(net.forward(g.constant(x), Mode::Eval, o1).value() == net.forward(g.constant(x), Mode::Eval, o2).value());
  CHECK_THROWS_AS(net.forward(g.constant(x), Mode::Train), UsageError);
  CHECK_THROWS_AS(net.logits(random_tensor({1, 16, 8, 8}, rng)), DimensionError);
  CHECK_THROWS_AS(net.logits(random_tensor({1, 8, 16, 16}, rng)), DimensionError);
}

TEST_CASE("head and probabilities") {
  Rng rng(4);
  Network net(NetworkSpec::desk(), rng);
  const Tensor x = random_tensor({3, 16, 16, 16}, rng);
  net.fc_weight().value.fill(0.0);
  net.fc_bias().value.fill(0.0);
  CHECK(net.logits(x) == Tensor({3}, 0.0));
  CHECK(net.predict_proba(x) == Tensor({3}, 0.5));
  net.fc_bias().value.fill(40.0);
  const Tensor saturated = net.predict_proba(x);
  for (double p : saturated.data()) {
    CHECK(p > 1.0 - 1e-15);
    CHECK(p < 1.0);
  }

  Network other(NetworkSpec::desk(), rng);
  const Tensor z = other.logits(x);
  const Tensor p = other.predict_proba(x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (z[i] > z[j]) CHECK(p[i] >= p[j]);
}

TEST_CASE("parameter accounting") {
  Rng rng(5);
  Network net(NetworkSpec::desk(), rng);
  std::size_t expected = 32 + 1;
  for (const auto& c : net.spec().base_blocks) expected += block_scalars(c);
  CHECK(net.param_count() == expected);
  std::size_t enumerated = 0;
  for (Parameter* p : net.parameters()) enumerated += p->value.size();
  CHECK(enumerated == expected);

  const std::size_t before = net.param_count();
  grow(net, Blending::Bernoulli, rng);
  const std::size_t n = net.spec().feature_size() * net.spec().feature_size();
  CHECK(net.param_count() - before == shape_summary(net.spec().extended_config(), n).parameter_count);

  Network wide(NetworkSpec::desk(Variant::CAN, 1000), rng);
  Network narrow(NetworkSpec::desk(Variant::CAN, 1), rng);
  CHECK(wide.param_count() > narrow.param_count());
  CHECK(wide.spec().base_blocks[0].c_bar == 16);

  const std::vector<double> decay = net.weight_decays(1e-4);
  const std::vector<Parameter*> params = net.parameters();
  REQUIRE(decay.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(decay[i] == (params[i]->name.rfind("fc.", 0) == 0 ? 1e-4 : 0.0));
  // Grown parameters come after the head.
  CHECK(params.back()->name == "bn_shift");
  CHECK(params[params.size() - net.extended()[0].block.parameters().size() - 1]->name == "fc.bias");
}

TEST_CASE("network gradients match central differences") {
  const GradcheckEntry e = network_gradient_check(tiny_spec(), 11);
  MESSAGE("tiny network worst relative error " << e.max_rel_error << " over " << e.checked << " coordinates");
  Rng scratch(0);
  CHECK(e.checked == Network(tiny_spec(), scratch).param_count());
  CHECK(e.max_rel_error < 1e-5);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(6);
  Network net(NetworkSpec::desk(), rng);
  grow(net, Blending::Bernoulli, rng);
  advance(net.extended()[0].state, rng);
  grow(net, Blending::Bernoulli, rng);
  for (CanBlock& b : net.base()) {
    for (auto& v : b.params().bn.running_mean.data()) v = rng.normal();
    for (auto& v : b.params().me.value.data()) v = rng.normal() * 0.1;
  }

  AdamState adam;
  std::vector<Parameter*> params = net.parameters();
  for (Parameter* p : params)
    for (auto& v : p->grad.data()) v = rng.normal();
  const std::vector<double> decay = net.weight_decays(1e-4);
  adam_step(params, adam, 1e-3, decay);

  Rng stream(99);
  stream.normal();
  const auto path = std::filesystem::temp_directory_path() / "procan_ckpt_test.json";
  Checkpoint ckpt{net, adam, {{"stream", stream.serialize()}}, nlohmann::json{{"epoch", 7}}};
  save_checkpoint(path, ckpt);
  Checkpoint back = load_checkpoint(path);

  CHECK(network_to_json(back.net) == network_to_json(net));
  CHECK(adam_to_json(*back.adam) == adam_to_json(adam));
  CHECK(back.meta["epoch"] == 7);
  Rng restored;
  restored.deserialize(back.rng_states.at("stream"));
  CHECK(restored == stream);

  const Tensor x = random_tensor({2, 16, 16, 16}, rng);
  CHECK(back.net.logits(x) == net.logits(x));
  REQUIRE(back.net.extended().size() == 2);
  CHECK(back.net.extended()[0].state.p == 0.25);
  CHECK(*back.net.extended()[0].state.omega == *net.extended()[0].state.omega);
  CHECK(back.net.extended()[1].state.phase == GrowthPhase::Start);

  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}
