#include <doctest.h>

#include <cmath>

#include "procan/errors.hpp"
#include "procan/network.hpp"
#include "procan/ops.hpp"
#include "test_util.hpp"

using namespace procan;
using procan::testing::random_tensor;

namespace {

GrowthState transition_at(double p, Blending strategy, std::size_t h, std::size_t w) {
  GrowthState s = start_state(strategy, h, w);
  s.phase = GrowthPhase::Transition;
  s.p = p;
  return s;
}

}  // namespace

TEST_CASE("mask sampling") {
  Rng rng(1);
  CHECK(sample_mask(0.0, 4, 5, rng) == Tensor({4, 5}, 0.0));
  CHECK(sample_mask(1.0, 4, 5, rng) == Tensor({4, 5}, 1.0));
  CHECK_THROWS_AS(sample_mask(1.5, 2, 2, rng), ConfigError);
  CHECK_THROWS_AS(sample_mask(-0.1, 2, 2, rng), ConfigError);

  double ones = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const Tensor mask = sample_mask(0.5, 100, 100, rng);
    for (double v : mask.data()) ones += v;
  }
  const double fraction = ones / 1e6;
  CHECK(fraction >= 0.49);
  CHECK(fraction <= 0.51);

  Rng a(42), b(42);
  CHECK(sample_mask(0.3, 8, 8, a) == sample_mask(0.3, 8, 8, b));
}

TEST_CASE("blending identities") {
  Rng rng(2);
  Graph g(false);
  Var prev = g.constant(random_tensor({2, 3, 4, 4}, rng));
  Var grown = g.constant(random_tensor({2, 3, 4, 4}, rng));

  GrowthState zero = transition_at(0.25, Blending::Bernoulli, 4, 4);
  zero.omega = Tensor({4, 4}, 0.0);
  CHECK(blend(prev, grown, zero).value() == prev.value());
  GrowthState one = zero;
  one.omega = Tensor({4, 4}, 1.0);
  CHECK(blend(prev, grown, one).value() == grown.value());

  const Tensor half = blend(prev, grown, transition_at(0.5, Blending::Scalar, 4, 4)).value();
  for (std::size_t i = 0; i < half.size(); ++i) CHECK(half[i] == 0.5 * grown.value()[i] + 0.5 * prev.value()[i]);

  CHECK(blend(prev, grown, transition_at(0.5, Blending::None, 4, 4)).value() == grown.value());

  for (Blending s : {Blending::None, Blending::Scalar, Blending::Bernoulli}) {
    CHECK(blend(prev, grown, start_state(s, 4, 4)).value() == prev.value());
    GrowthState fin = start_state(s, 4, 4);
    fin.phase = GrowthPhase::Final;
    fin.p = 1.0;
    fin.omega.reset();
    CHECK(blend(prev, grown, fin).value() == grown.value());
  }

  GrowthState bad = zero;
  bad.omega = Tensor({3, 4}, 1.0);
  CHECK_THROWS_AS(blend(prev, grown, bad), DimensionError);
  CHECK_THROWS_AS(blend(prev, g.constant(random_tensor({2, 3, 4, 3}, rng)), zero), DimensionError);
}

TEST_CASE("bernoulli blend preserves values; scalar blend mixes them") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    Graph g(false);
    const std::size_t h = 1 + trial % 5, w = 1 + (trial / 5) % 5;
    Var prev = g.constant(random_tensor({2, 2, h, w}, rng));
    Var grown = g.constant(random_tensor({2, 2, h, w}, rng));
    GrowthState s = transition_at(rng.uniform(), Blending::Bernoulli, h, w);
    s.omega = sample_mask(s.p, h, w, rng);
    const Tensor out = blend(prev, grown, s).value();
    bool ok = true;
    for (std::size_t i = 0; i < out.size(); ++i) ok = ok && (out[i] == prev.value()[i] || out[i] == grown.value()[i]);
    CHECK(ok);
  }

  Graph g(false);
  Var prev = g.constant(random_tensor({1, 2, 3, 3}, rng));
  Var grown = g.constant(random_tensor({1, 2, 3, 3}, rng));
  const Tensor mixed = blend(prev, grown, transition_at(0.25, Blending::Scalar, 3, 3)).value();
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    CHECK(mixed[i] != prev.value()[i]);
    CHECK(mixed[i] != grown.value()[i]);
  }
}

TEST_CASE("bernoulli blend is unbiased for the scalar blend") {
  Rng rng(4);
  Graph g(false);
  Var prev = g.constant(random_tensor({1, 2, 4, 4}, rng, 1.0, 2.0));
  Var grown = g.constant(random_tensor({1, 2, 4, 4}, rng, 2.0, 3.0));
  const double p = 0.75;
  const Tensor scalar = blend(prev, grown, transition_at(p, Blending::Scalar, 4, 4)).value();
  Tensor acc(scalar.shape(), 0.0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    GrowthState s = transition_at(p, Blending::Bernoulli, 4, 4);
    s.omega = sample_mask(p, 4, 4, rng);
    acc += blend(prev, grown, s).value();
  }
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(std::abs(acc[i] / draws - scalar[i]) < 0.01 * std::abs(scalar[i]));
}

TEST_CASE("advance walks the schedule") {
  Rng rng(5);
  GrowthState s = start_state(Blending::Bernoulli, 3, 3);
  CHECK(s.phase == GrowthPhase::Start);
  CHECK(s.p == 0.0);
  const double expected[] = {0.25, 0.5, 0.75};
  for (double p : expected) {
    advance(s, rng);
    CHECK(s.phase == GrowthPhase::Transition);
    CHECK(s.p == p);
    REQUIRE(s.omega.has_value());
    for (double v : s.omega->data()) CHECK((v == 0.0 || v == 1.0));
  }
  advance(s, rng);
  CHECK(s.phase == GrowthPhase::Final);
  CHECK(s.p == 1.0);
  CHECK_FALSE(s.omega.has_value());
  CHECK_THROWS_AS(advance(s, rng), StateError);

  GrowthState scalar = start_state(Blending::Scalar, 3, 3);
  advance(scalar, rng);
  CHECK_FALSE(scalar.omega.has_value());
  CHECK(scalar.p == 0.25);
}

TEST_CASE("growing leaves eval predictions unchanged until the first advance") {
  Rng rng(6);
  for (Blending strategy : {Blending::None, Blending::Scalar, Blending::Bernoulli}) {
    Network net(NetworkSpec::desk(), rng);
    const Tensor x = random_tensor({3, 16, 16, 16}, rng);
    const Tensor before = net.logits(x);
    grow(net, strategy, rng);
    CHECK(net.extended().size() == 1);
    CHECK(net.logits(x) == before);
    grow(net, strategy, rng);
    CHECK(net.extended().size() == 2);
    CHECK(net.logits(x) == before);
    CHECK(&net.extended()[0].state != &net.extended()[1].state);
    CHECK_THROWS_AS(grow(net, strategy, rng), StateError);

    advance(net.extended()[0].state, rng);
    advance(net.extended()[0].state, rng);
    CHECK(net.extended()[0].state.p == 0.5);
    CHECK(net.extended()[1].state.p == 0.0);
  }
}

TEST_CASE("final-phase block acts as a plain block") {
  Rng rng(7);
  Network net(NetworkSpec::desk_with(2, 1), rng);
  grow(net, Blending::Bernoulli, rng);
  for (int i = 0; i < 4; ++i) advance(net.extended()[0].state, rng);
  const Tensor x = random_tensor({2, 16, 16, 16}, rng);

  Graph g(false);
  Var h = g.constant(x);
  for (CanBlock& b : net.base()) h = b.forward(h, Mode::Eval);
  Var grown = net.extended()[0].block.forward(h, Mode::Eval);
  Var pooled = global_avg_pool(grown);
  Var logit = linear(pooled, g.constant(net.fc_weight().value), g.constant(net.fc_bias().value));
  CHECK(net.logits(x).values() == logit.value().values());
}

TEST_CASE("growing the full architecture to its budget") {
  Rng rng(8);
  Network net(NetworkSpec::full(), rng);
  for (int i = 0; i < 3; ++i) {
    grow(net, Blending::Bernoulli, rng);
    for (int k = 0; k < 4; ++k) advance(net.extended().back().state, rng);
  }
  CHECK_THROWS_AS(grow(net, Blending::Bernoulli, rng), StateError);
  std::vector<LayerShape> shapes;
  Graph g(false);
  ForwardOptions opts;
  opts.shapes = &shapes;
  net.forward(g.constant(random_tensor({1, 32, 32, 32}, rng)), Mode::Eval, opts);
  REQUIRE(shapes.size() == 9);
  for (std::size_t i = 4; i < 7; ++i) {
    CHECK(shapes[i].layer == "Extended CAN " + std::to_string(i - 3));
    CHECK(shapes[i].input == Shape{1, 256, 8, 8});
    CHECK(shapes[i].output == Shape{1, 256, 8, 8});
  }
}
