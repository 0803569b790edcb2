#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "procan/rng.hpp"

namespace procan {

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Scores are probabilities of the positive class; labels are 0 or 1.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  void validate() const;
  std::size_t positives() const;
  std::size_t negatives() const;
};

/// Score ≥ threshold counts as a positive prediction.
ConfusionCounts confusion(const ScoredSet& set, double threshold = 0.5);

/// A metric with a zero denominator is empty rather than zero.
struct ClassificationMetrics {
  std::optional<double> accuracy, sensitivity, precision, f1;
};

ClassificationMetrics classification_metrics(const ConfusionCounts& c);

/// Mann-Whitney form: positive/negative pairs, ties worth one half.
double auc(const ScoredSet& set);
/// Trapezoidal area under the empirical ROC curve; equal to auc().
double auc_trapezoid(const ScoredSet& set);

/// A metric evaluated on a resample; empty when undefined.
using SetMetric = std::function<std::optional<double>(const ScoredSet&)>;

struct BootstrapResult {
  double mean = 0.0;
  double std = 0.0;          // sample standard deviation
  std::size_t used = 0;      // resamples with a defined metric
  std::size_t skipped = 0;   // single-class or otherwise undefined resamples
};

/// Resamples with replacement to the original size. Resamples where the metric
/// is undefined are skipped and counted.
BootstrapResult bootstrap_ci(const ScoredSet& set, const SetMetric& metric, std::size_t iterations, Rng& rng,
                             std::ostream* log = nullptr);

/// AUC as a SetMetric (empty on single-class sets).
std::optional<double> auc_metric(const ScoredSet& set);

struct MetricsRow {
  std::string phase;
  std::size_t epoch = 0;
  std::string split;
  ClassificationMetrics m;
  std::optional<double> auc;
};

MetricsRow metrics_row(const ScoredSet& set, std::string phase, std::size_t epoch, std::string split);

inline constexpr const char* kMetricsHeader = "phase,epoch,split,accuracy,sensitivity,precision,f1,auc";
/// Undefined values print as "nan".
std::string to_csv(const MetricsRow& row);
/// Fixed six-decimal formatting shared by the CSV writers.
std::string format_fixed(std::optional<double> v, int digits = 6);

}  // namespace procan
