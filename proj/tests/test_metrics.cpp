#include <doctest.h>

#include <cmath>

#include "procan/errors.hpp"
#include "procan/metrics.hpp"

using namespace procan;

namespace {

double brute_force_auc(const ScoredSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      if (s.labels[i] != 1 || s.labels[j] != 0) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  return wins / pairs;
}

// Scores rounded to a coarse grid so ties are common.
ScoredSet random_set(Rng& rng, std::size_t n) {
  ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.bernoulli(0.5) ? 1 : 0;
    double score = std::clamp(rng.normal(label ? 0.6 : 0.4, 0.2), 0.0, 1.0);
    if (rng.bernoulli(0.5)) score = std::round(score * 20.0) / 20.0;
    s.scores.push_back(score);
    s.labels.push_back(label);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

// Hanley and McNeil (1982) standard error of the AUC.
double hanley_mcneil_se(double a, double n_pos, double n_neg) {
  const double q1 = a / (2.0 - a), q2 = 2.0 * a * a / (1.0 + a);
  return std::sqrt((a * (1.0 - a) + (n_pos - 1.0) * (q1 - a * a) + (n_neg - 1.0) * (q2 - a * a)) / (n_pos * n_neg));
}

}  // namespace

TEST_CASE("confusion counts") {
  CHECK(confusion({{0.9, 0.1}, {1, 0}}) == ConfusionCounts{1, 1, 0, 0});
  CHECK(confusion({{0.5}, {0}}) == ConfusionCounts{0, 0, 1, 0});
  CHECK(confusion({{0.5}, {1}}) == ConfusionCounts{1, 0, 0, 0});
  const ConfusionCounts all_pos = confusion({{0.7, 0.8, 0.6}, {1, 0, 0}});
  CHECK(all_pos.tn == 0);
  CHECK(all_pos.fn == 0);
  CHECK(all_pos.total() == 3);
  CHECK_THROWS_AS(confusion({{0.1, 0.2}, {1}}), UsageError);
  CHECK_THROWS_AS(confusion({{0.1}, {2}}), UsageError);
}

TEST_CASE("classification metrics") {
  const ClassificationMetrics m = classification_metrics({2, 2, 1, 0});
  CHECK(*m.accuracy == 0.8);
  CHECK(*m.sensitivity == 1.0);
  CHECK(*m.precision == 2.0 / 3.0);
  CHECK(*m.f1 == 0.8);

  const ClassificationMetrics none = classification_metrics({0, 3, 1, 0});
  CHECK_FALSE(none.sensitivity.has_value());
  CHECK(*none.precision == 0.0);
  CHECK(*none.f1 == 0.0);
  CHECK(classification_metrics({}).accuracy == std::nullopt);

  const ClassificationMetrics perfect = classification_metrics({5, 4, 0, 0});
  for (auto v : {perfect.accuracy, perfect.sensitivity, perfect.precision, perfect.f1}) CHECK(*v == 1.0);

  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const ConfusionCounts c{rng.below(4), rng.below(4), rng.below(4), rng.below(4)};
    const ClassificationMetrics r = classification_metrics(c);
    for (auto v : {r.accuracy, r.sensitivity, r.precision, r.f1})
      if (v) CHECK((*v >= 0.0 && *v <= 1.0));
  }
}

TEST_CASE("auc examples") {
  CHECK(auc({{0.8, 0.6, 0.4, 0.7}, {1, 1, 0, 0}}) == 0.75);
  CHECK(auc({{0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}}) == 1.0);
  CHECK(auc({{0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}}) == 0.5);
  CHECK(auc_trapezoid({{0.8, 0.6, 0.4, 0.7}, {1, 1, 0, 0}}) == 0.75);
  CHECK_THROWS_AS(auc({{0.1, 0.2}, {1, 1}}), UsageError);
  CHECK_THROWS_AS(auc_trapezoid({{0.1, 0.2}, {0, 0}}), UsageError);
  CHECK_FALSE(auc_metric({{0.1, 0.2}, {0, 0}}).has_value());
}

TEST_CASE("auc agrees with pairwise counting and the ROC integral") {
  Rng rng(2);
  double worst_brute = 0.0, worst_trap = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const ScoredSet s = random_set(rng, 2 + rng.below(60));
    const double a = auc(s);
    worst_brute = std::max(worst_brute, std::abs(a - brute_force_auc(s)));
    worst_trap = std::max(worst_trap, std::abs(a - auc_trapezoid(s)));
  }
  CHECK(worst_brute < 1e-12);
  CHECK(worst_trap < 1e-12);
}

TEST_CASE("auc is a rank statistic") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const ScoredSet s = random_set(rng, 40);
    const double a = auc(s);
    ScoredSet cubed = s, squashed = s, flipped = s;
    for (auto& v : cubed.scores) v = v * v * v;
    for (auto& v : squashed.scores) v = 1.0 / (1.0 + std::exp(-(5.0 * v - 2.0)));
    for (auto& l : flipped.labels) l = 1 - l;
    CHECK(std::abs(auc(cubed) - a) < 1e-12);
    CHECK(std::abs(auc(squashed) - a) < 1e-12);
    CHECK(std::abs(a + auc(flipped) - 1.0) < 1e-12);
  }
}

TEST_CASE("bootstrap") {
  const ScoredSet perfect{{0.9, 0.8, 0.95, 0.1, 0.2, 0.05}, {1, 1, 1, 0, 0, 0}};
  Rng r0(4);
  const BootstrapResult p = bootstrap_ci(perfect, auc_metric, 1000, r0);
  CHECK(p.mean == 1.0);
  CHECK(p.std == 0.0);
  CHECK(p.used + p.skipped == 1000);
  CHECK(p.skipped > 0);

  Rng gen(5);
  const ScoredSet s = random_set(gen, 73);
  Rng a(6), b(6);
  const BootstrapResult x = bootstrap_ci(s, auc_metric, 1000, a);
  const BootstrapResult y = bootstrap_ci(s, auc_metric, 1000, b);
  CHECK(x.mean == y.mean);
  CHECK(x.std == y.std);

  const double se = hanley_mcneil_se(auc(s), static_cast<double>(s.positives()), static_cast<double>(s.negatives()));
  MESSAGE("bootstrap std " << x.std << ", Hanley-McNeil " << se);
  CHECK(x.std < 3.0 * se);
  CHECK(x.std > se / 3.0);

  Rng r1(7);
  CHECK_THROWS_AS(bootstrap_ci(s, auc_metric, 1, r1), UsageError);
  const ScoredSet one_class{{0.2, 0.4}, {1, 1}};
  CHECK_THROWS_AS(bootstrap_ci(one_class, auc_metric, 10, r1), UsageError);
}

TEST_CASE("metrics csv row") {
  const ScoredSet s{{0.9, 0.4, 0.6, 0.2, 0.5}, {1, 1, 0, 0, 0}};
  const MetricsRow row = metrics_row(s, "test", 60, "test");
  CHECK(to_csv(row) == "test,60,test,0.400000,0.500000,0.333333,0.400000,0.666667");
  const MetricsRow single = metrics_row({{0.9, 0.8}, {1, 1}}, "test", 1, "val");
  CHECK(to_csv(single) == "test,1,val,1.000000,1.000000,1.000000,1.000000,nan");
}
