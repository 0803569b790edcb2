#include "procan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "procan/errors.hpp"

namespace procan {

void ScoredSet::validate() const {
  if (scores.size() != labels.size())
    throw UsageError("scored set has " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(labels.size()) + " labels");
  for (int l : labels)
    if (l != 0 && l != 1) throw UsageError("labels must be 0 or 1");
  for (double s : scores)
    if (!std::isfinite(s)) throw UsageError("scores must be finite");
}

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t ScoredSet::negatives() const { return labels.size() - positives(); }

ConfusionCounts confusion(const ScoredSet& set, double threshold) {
  set.validate();
  ConfusionCounts c;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    const bool predicted = set.scores[i] >= threshold;
    if (set.labels[i] == 1)
      ++(predicted ? c.tp : c.fn);
    else
      ++(predicted ? c.fp : c.tn);
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  ClassificationMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

namespace {

void require_both_classes(const ScoredSet& set) {
  set.validate();
  if (set.positives() == 0 || set.negatives() == 0) throw UsageError("AUC needs at least one positive and one negative");
}

std::vector<std::size_t> order_by_score(const ScoredSet& set) {
  std::vector<std::size_t> idx(set.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });
  return idx;
}

}  // namespace

double auc(const ScoredSet& set) {
  require_both_classes(set);
  const auto idx = order_by_score(set);
  double wins = 0.0, negatives_below = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < idx.size() && set.scores[idx[j]] == set.scores[idx[i]]) {
      (set.labels[idx[j]] == 1 ? pos : neg) += 1.0;
      ++j;
    }
    wins += pos * negatives_below + 0.5 * pos * neg;
    negatives_below += neg;
    i = j;
  }
  return wins / (static_cast<double>(set.positives()) * static_cast<double>(set.negatives()));
}

double auc_trapezoid(const ScoredSet& set) {
  require_both_classes(set);
  auto idx = order_by_score(set);
  std::reverse(idx.begin(), idx.end());
  const double np = static_cast<double>(set.positives()), nn = static_cast<double>(set.negatives());
  double tp = 0.0, fp = 0.0, area = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double dtp = 0.0, dfp = 0.0;
    while (j < idx.size() && set.scores[idx[j]] == set.scores[idx[i]]) {
      (set.labels[idx[j]] == 1 ? dtp : dfp) += 1.0;
      ++j;
    }
    area += (dfp / nn) * ((tp / np) + ((tp + dtp) / np)) / 2.0;
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return area;
}

std::optional<double> auc_metric(const ScoredSet& set) {
  set.validate();
  if (set.positives() == 0 || set.negatives() == 0) return std::nullopt;
  return auc(set);
}

BootstrapResult bootstrap_ci(const ScoredSet& set, const SetMetric& metric, std::size_t iterations, Rng& rng,
                             std::ostream* log) {
  set.validate();
  if (iterations < 2) throw UsageError("bootstrap needs at least 2 iterations");
  if (set.scores.empty()) throw UsageError("bootstrap needs a non-empty set");
  const std::size_t n = set.scores.size();
  std::vector<double> values;
  BootstrapResult r;
  for (std::size_t it = 0; it < iterations; ++it) {
    Rng sub = rng.split();
    ScoredSet resample;
    resample.scores.reserve(n);
    resample.labels.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(sub.below(n));
      resample.scores.push_back(set.scores[i]);
      resample.labels.push_back(set.labels[i]);
    }
    const std::optional<double> v = metric(resample);
    if (v)
      values.push_back(*v);
    else
      ++r.skipped;
  }
  if (values.empty()) throw UsageError("metric is undefined on every bootstrap resample");
  r.used = values.size();
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  if (log && r.skipped > 0) *log << "bootstrap skipped " << r.skipped << " degenerate resamples\n";
  return r;
}

MetricsRow metrics_row(const ScoredSet& set, std::string phase, std::size_t epoch, std::string split) {
  MetricsRow row;
  row.phase = std::move(phase);
  row.epoch = epoch;
  row.split = std::move(split);
  row.m = classification_metrics(confusion(set));
  row.auc = auc_metric(set);
  return row;
}

std::string format_fixed(std::optional<double> v, int digits) {
  if (!v || !std::isfinite(*v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

std::string to_csv(const MetricsRow& row) {
  return row.phase + "," + std::to_string(row.epoch) + "," + row.split + "," + format_fixed(row.m.accuracy) + "," +
         format_fixed(row.m.sensitivity) + "," + format_fixed(row.m.precision) + "," + format_fixed(row.m.f1) + "," +
         format_fixed(row.auc);
}

}  // namespace procan
