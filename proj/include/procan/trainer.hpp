#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "procan/attention.hpp"
#include "procan/curriculum.hpp"
#include "procan/datapipe.hpp"
#include "procan/metrics.hpp"
#include "procan/network.hpp"
#include "procan/progrow.hpp"

namespace procan {

enum class Architecture { Desk, Full };
enum class AugmentMode { Sampled, Full };

struct TrainConfig {
  Architecture architecture = Architecture::Full;
  std::size_t cube_size = 32;

  std::size_t total_epochs = 60;
  std::size_t batch_size = 256;
  double lr_initial = 1e-3;
  double lr_after = 1e-4;
  std::size_t lr_drop_epoch = 20;       // first epoch at lr_after
  std::size_t refine_start_epoch = 51;  // first epoch without augmentation
  double fc_weight_decay = 1e-4;
  double dropout_p = 0.5;
  std::size_t base_block_count = 4;
  std::size_t extended_block_budget = 3;
  Variant variant = Variant::CAN;
  std::size_t c_bar = 1;
  DifficultyCriterion curriculum = DifficultyCriterion::Diameter;
  Blending blending = Blending::Bernoulli;
  double validation_fraction = 0.10;
  /// Upper bound on epochs in one early-stopped phase; 0 means unbounded.
  std::size_t phase_epoch_cap = 0;
  AugmentMode augmentation = AugmentMode::Sampled;

  std::uint64_t model_seed = 1;
  std::uint64_t data_seed = 2;
  std::uint64_t mask_seed = 3;
  std::uint64_t dropout_seed = 4;

  // Synthetic data and held-out split.
  std::size_t synthetic_n = 500;
  std::uint64_t synthetic_seed = 7;
  double test_fraction = 0.2;

  /// 16³ volumes, channels 8/16/32/32, T = 2, batch 32, phases capped at 10 epochs.
  static TrainConfig desk();
  static TrainConfig full();

  /// Every seed derived from one number.
  void set_seed(std::uint64_t seed);
  NetworkSpec network_spec() const;
  void validate() const;

  /// Flat `key = value` lines with every field.
  std::string resolved() const;
  /// Applies one key; unknown keys and bad values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Applies `key = value` lines (`#` starts a comment).
  void load_text(const std::string& text, const std::string& source = "config");
  void load_file(const std::filesystem::path& path);
};

std::string to_string(Architecture a);
std::string to_string(AugmentMode m);

struct EpochRecord {
  std::size_t epoch = 0;  // global, 1-based
  std::string phase;      // easy, full, transition, settle, remainder
  std::size_t block = 0;  // extended block being grown or settled, 0 otherwise
  double p = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> val_auc;
  double lr = 0.0;
  bool augmented = false;
};

/// Validation loss around one block insertion. `before` is the last epoch before
/// the block connects, `at_insertion` is measured right after the first advance
/// with no training, `after_epoch` is the end of the first transition epoch.
struct GrowthEvent {
  std::size_t block = 0;
  std::size_t epoch = 0;  // epoch of the first transition step
  double val_loss_before = 0.0;
  double val_loss_at_insertion = 0.0;
  double val_loss_after_epoch = 0.0;
  double epoch_jump() const { return val_loss_after_epoch - val_loss_before; }
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<GrowthEvent> growth;
  std::vector<std::string> notes;
};

struct TrainResult {
  Network net;
  TrainLog log;
};

/// Stratified split: about `fraction` of each class goes to the second list.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<Sample>& samples,
                                                                                 double fraction, Rng& rng);
/// Stratified fold index per sample.
std::vector<std::size_t> stratified_folds(const std::vector<Sample>& samples, std::size_t folds, Rng& rng);

struct TrainTestSplit {
  std::vector<Sample> train, test;
};

/// Held-out test split (test_fraction, stratified), drawn from a stream derived
/// from data_seed so that eval reproduces the split of the training run.
TrainTestSplit train_test_split(const std::vector<Sample>& samples, const TrainConfig& config);

/// gen_synthetic with the config's size, count and seed, preprocessed.
std::vector<Sample> synthetic_samples(const TrainConfig& config);

/// Curriculum phases, progressive growing and refinement against one epoch budget.
TrainResult train_procan(const std::vector<Sample>& train, const TrainConfig& config, std::ostream* log = nullptr);

struct Evaluation {
  ScoredSet scores;
  double loss = 0.0;
};

/// Eval-mode predictions without augmentation.
Evaluation evaluate(Network& net, const std::vector<Sample>& samples);
MetricsRow evaluate_row(Network& net, const std::vector<Sample>& samples, std::string phase, std::size_t epoch,
                        std::string split);

/// Mean of the members' predicted probabilities.
Tensor ensemble_predict(std::vector<Network>& members, const Tensor& batch);

struct CvResult {
  std::vector<MetricsRow> folds;
  std::vector<TrainLog> logs;
  /// metric name → "mean±std" in percent
  std::vector<std::pair<std::string, std::string>> summary;
};

CvResult cross_validate(const std::vector<Sample>& samples, const TrainConfig& config, std::size_t folds,
                        std::ostream* log = nullptr);

/// Stacks sample cubes into a [B×S×S×S] batch.
Tensor make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx);

// CSV writers shared by the CLI and tests.
std::string train_log_csv(const TrainLog& log);
std::string curves_csv(const TrainLog& log);
std::string growth_events_csv(const TrainLog& log);

}  // namespace procan
