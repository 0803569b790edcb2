#include "procan/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "procan/errors.hpp"
#include "procan/ops.hpp"
#include "procan/optim.hpp"

namespace procan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return v;
}

double bce_term(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

Evaluation evaluate_indices(Network& net, const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw UsageError("evaluation set is empty");
  constexpr std::size_t kChunk = 64;
  Evaluation ev;
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), start + kChunk)));
    const Tensor z = net.logits(make_batch(samples, chunk));
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      const double y = samples[chunk[k]].label();
      total += bce_term(z[k], y);
      ev.scores.scores.push_back(stable_sigmoid(z[k]));
      ev.scores.labels.push_back(static_cast<int>(y));
    }
  }
  ev.loss = total / static_cast<double>(idx.size());
  return ev;
}

class Trainer {
 public:
  Trainer(const std::vector<Sample>& samples, const TrainConfig& cfg, std::ostream* log)
      : cfg_(cfg),
        samples_(samples),
        log_(log),
        model_rng_(cfg.model_seed),
        data_rng_(cfg.data_seed),
        mask_rng_(cfg.mask_seed),
        dropout_rng_(cfg.dropout_seed),
        net_(cfg.network_spec(), model_rng_) {}

  TrainResult run() {
    auto [fit, val] = stratified_split(samples_, cfg_.validation_fraction, data_rng_);
    if (fit.size() < 2 || val.empty()) throw ConfigError("training set too small for a validation split");
    val_ = std::move(val);

    std::vector<NoduleRecord> records;
    for (std::size_t i : fit) records.push_back(samples_[i].record);
    const Partition part = partition(records, cfg_.curriculum);
    std::vector<std::size_t> easy, full;
    for (std::size_t k : part.easy) easy.push_back(fit[k]);
    for (std::size_t k : part.full) full.push_back(fit[k]);

    if (cfg_.curriculum != DifficultyCriterion::None) {
      if (easy.empty())
        throw ConfigError("no easy training samples under the '" + to_string(cfg_.curriculum) +
                          "' curriculum; switch the criterion");
      if (easy.size() < 2) throw ConfigError("fewer than two easy training samples; switch the criterion");
      early_stopped(easy, "easy", 0);
    }
    early_stopped(full, "full", 0);

    for (std::size_t block = 1; block <= cfg_.extended_block_budget; ++block) {
      if (!budget_left()) {
        note("epoch budget exhausted before extended block " + std::to_string(block) + " was grown");
        break;
      }
      grow_block(full, block);
      early_stopped(full, "settle", block);
    }
    while (budget_left()) run_epoch(full, "remainder", 0, 0.0);
    return TrainResult{std::move(net_), std::move(log_data_)};
  }

 private:
  bool budget_left() const { return epoch_ < cfg_.total_epochs; }

  void note(const std::string& msg) {
    log_data_.notes.push_back(msg);
    if (log_) *log_ << "note: " << msg << '\n';
  }

  double last_val_loss() {
    if (!log_data_.epochs.empty()) return log_data_.epochs.back().val_loss;
    return evaluate_indices(net_, samples_, val_).loss;
  }

  void early_stopped(const std::vector<std::size_t>& pool, const std::string& phase, std::size_t block) {
    std::vector<double> history;
    const double p = block > 0 ? 1.0 : 0.0;
    while (budget_left()) {
      history.push_back(run_epoch(pool, phase, block, p).val_accuracy);
      if (should_stop(history)) break;
      if (cfg_.phase_epoch_cap > 0 && history.size() >= cfg_.phase_epoch_cap) {
        note(phase + " phase reached its cap of " + std::to_string(cfg_.phase_epoch_cap) + " epochs");
        break;
      }
    }
  }

  void grow_block(const std::vector<std::size_t>& pool, std::size_t block) {
    const double before = last_val_loss();
    net_.grow(cfg_.blending, model_rng_);
    GrowthEvent ev;
    ev.block = block;
    ev.val_loss_before = before;
    for (std::size_t step = 0; step < 4; ++step) {
      GrowthState& st = net_.extended().back().state;
      if (!budget_left()) {
        st.phase = GrowthPhase::Final;
        st.p = 1.0;
        st.omega.reset();
        note("epoch budget exhausted during the transition of block " + std::to_string(block) +
             "; finalized at p=1");
        break;
      }
      advance(st, mask_rng_);
      if (step == 0) {
        ev.epoch = epoch_ + 1;
        ev.val_loss_at_insertion = evaluate_indices(net_, samples_, val_).loss;
      }
      const double p = st.p;
      const EpochRecord& rec = run_epoch(pool, "transition", block, p);
      if (step == 0) {
        ev.val_loss_after_epoch = rec.val_loss;
        log_data_.growth.push_back(ev);
      }
    }
  }

  const EpochRecord& run_epoch(const std::vector<std::size_t>& pool, const std::string& phase, std::size_t block,
                               double p) {
    const std::size_t epoch = epoch_ + 1;
    const bool augmented = epoch < cfg_.refine_start_epoch;
    const double lr = epoch < cfg_.lr_drop_epoch ? cfg_.lr_initial : cfg_.lr_after;

    // (sample, rotation index)
    std::vector<std::pair<std::size_t, std::size_t>> items;
    for (std::size_t i : pool) {
      if (augmented && cfg_.augmentation == AugmentMode::Full)
        for (std::size_t r = 0; r < kAugmentCount; ++r) items.emplace_back(i, r);
      else
        items.emplace_back(i, augmented ? static_cast<std::size_t>(data_rng_.below(kAugmentCount)) : 0);
    }
    shuffle(items.begin(), items.end(), data_rng_);

    std::vector<Parameter*> params = net_.parameters();
    const std::vector<double> decay = net_.weight_decays(cfg_.fc_weight_decay);
    const std::size_t s = cfg_.cube_size;
    double total = 0.0;
    std::size_t start = 0;
    while (start < items.size()) {
      std::size_t end = std::min(items.size(), start + cfg_.batch_size);
      // Batch norm needs two samples; a lone remainder joins the previous batch.
      if (items.size() - end == 1) end = items.size();
      const std::size_t b = end - start;
      Tensor x({b, s, s, s});
      Tensor y({b});
      for (std::size_t k = 0; k < b; ++k) {
        const Sample& smp = samples_[items[start + k].first];
        const std::size_t rot = items[start + k].second;
        const Tensor cube = rot == 0 ? smp.cube : rotate(smp.cube, rot, smp.air);
        std::copy(cube.data().begin(), cube.data().end(), x.data().begin() + static_cast<std::ptrdiff_t>(k * s * s * s));
        y[k] = smp.label();
      }
      Graph g;
      ForwardOptions opts;
      opts.dropout_rng = &dropout_rng_;
      opts.mask_rng = &mask_rng_;
      Var loss = bce_loss(net_.forward(g.constant(std::move(x)), Mode::Train, opts), y);
      for (Parameter* prm : params) prm->grad.fill(0.0);
      g.backward(loss);
      adam_step(params, adam_, lr, decay);
      total += loss.value()[0] * static_cast<double>(b);
      start = end;
    }

    const Evaluation ev = evaluate_indices(net_, samples_, val_);
    const ConfusionCounts cc = confusion(ev.scores);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.block = block;
    rec.p = p;
    rec.train_loss = total / static_cast<double>(items.size());
    rec.val_loss = ev.loss;
    rec.val_accuracy = *classification_metrics(cc).accuracy;
    rec.val_auc = auc_metric(ev.scores);
    rec.lr = lr;
    rec.augmented = augmented;
    epoch_ = epoch;
    log_data_.epochs.push_back(rec);
    if (log_)
      *log_ << "epoch " << epoch << ' ' << phase << " block " << block << " p " << p << " loss "
            << fmt(rec.train_loss) << " val_loss " << fmt(rec.val_loss) << " val_acc " << fmt(rec.val_accuracy)
            << '\n';
    return log_data_.epochs.back();
  }

  const TrainConfig& cfg_;
  const std::vector<Sample>& samples_;
  std::ostream* log_;
  Rng model_rng_, data_rng_, mask_rng_, dropout_rng_;
  Network net_;
  AdamState adam_;
  std::vector<std::size_t> val_;
  std::size_t epoch_ = 0;
  TrainLog log_data_;
};

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::Desk ? "desk" : "full"; }
std::string to_string(AugmentMode m) { return m == AugmentMode::Sampled ? "sampled" : "full"; }

TrainConfig TrainConfig::full() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.architecture = Architecture::Desk;
  c.cube_size = 16;
  c.batch_size = 32;
  c.extended_block_budget = 2;
  c.phase_epoch_cap = 10;
  return c;
}

void TrainConfig::set_seed(std::uint64_t seed) {
  model_seed = splitmix64(4 * seed);
  data_seed = splitmix64(4 * seed + 1);
  mask_seed = splitmix64(4 * seed + 2);
  dropout_seed = splitmix64(4 * seed + 3);
  synthetic_seed = seed;
}

NetworkSpec TrainConfig::network_spec() const {
  NetworkSpec s = architecture == Architecture::Desk
                      ? NetworkSpec::desk_with(base_block_count, extended_block_budget, variant, c_bar)
                      : NetworkSpec::full(variant, c_bar);
  s.extended_budget = extended_block_budget;
  s.dropout_p = dropout_p;
  return s;
}

void TrainConfig::validate() const {
  if (total_epochs == 0) throw ConfigError("total_epochs must be positive");
  if (refine_start_epoch > total_epochs + 1)
    throw ConfigError("refine_start_epoch must not exceed total_epochs + 1");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batch norm)");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
    throw ConfigError("validation_fraction must lie in (0, 0.5)");
  if (!(test_fraction > 0.0 && test_fraction < 0.5)) throw ConfigError("test_fraction must lie in (0, 0.5)");
  if (!(lr_initial > 0.0 && lr_after > 0.0)) throw ConfigError("learning rates must be positive");
  if (fc_weight_decay < 0.0) throw ConfigError("fc_weight_decay must be non-negative");
  if (architecture == Architecture::Desk && cube_size != 16) throw ConfigError("the desk architecture takes 16³ cubes");
  if (architecture == Architecture::Full && cube_size != 32)
    throw ConfigError("the full architecture takes 32³ cubes");
  if (architecture == Architecture::Full && base_block_count != 4)
    throw ConfigError("the full architecture has exactly 4 base blocks");
  if (synthetic_n < 20) throw ConfigError("synthetic_n must be at least 20");
  network_spec().validate();
}

std::string TrainConfig::resolved() const {
  std::ostringstream o;
  o << "# fc_weight_decay applies to the fully-connected layer only.\n"
    << "architecture = " << to_string(architecture) << '\n'
    << "cube_size = " << cube_size << '\n'
    << "total_epochs = " << total_epochs << '\n'
    << "batch_size = " << batch_size << '\n'
    << "lr_initial = " << shortest(lr_initial) << '\n'
    << "lr_after = " << shortest(lr_after) << '\n'
    << "lr_drop_epoch = " << lr_drop_epoch << '\n'
    << "refine_start_epoch = " << refine_start_epoch << '\n'
    << "fc_weight_decay = " << shortest(fc_weight_decay) << '\n'
    << "dropout_p = " << shortest(dropout_p) << '\n'
    << "base_block_count = " << base_block_count << '\n'
    << "extended_block_budget = " << extended_block_budget << '\n'
    << "variant = " << to_string(variant) << '\n'
    << "c_bar = " << c_bar << '\n'
    << "curriculum = " << to_string(curriculum) << '\n'
    << "blending = " << to_string(blending) << '\n'
    << "validation_fraction = " << shortest(validation_fraction) << '\n'
    << "phase_epoch_cap = " << phase_epoch_cap << '\n'
    << "augmentation = " << to_string(augmentation) << '\n'
    << "model_seed = " << model_seed << '\n'
    << "data_seed = " << data_seed << '\n'
    << "mask_seed = " << mask_seed << '\n'
    << "dropout_seed = " << dropout_seed << '\n'
    << "synthetic_n = " << synthetic_n << '\n'
    << "synthetic_seed = " << synthetic_seed << '\n'
    << "test_fraction = " << shortest(test_fraction) << '\n';
  return o.str();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  auto sz = [&] { return parse_number<std::size_t>(key, value); };
  auto u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  auto dbl = [&] { return parse_number<double>(key, value); };
  if (key == "architecture") {
    if (value == "desk")
      architecture = Architecture::Desk;
    else if (value == "full")
      architecture = Architecture::Full;
    else
      throw ConfigError("architecture must be desk or full, got '" + value + "'");
  } else if (key == "cube_size") {
    cube_size = sz();
  } else if (key == "total_epochs") {
    total_epochs = sz();
  } else if (key == "batch_size") {
    batch_size = sz();
  } else if (key == "lr_initial") {
    lr_initial = dbl();
  } else if (key == "lr_after") {
    lr_after = dbl();
  } else if (key == "lr_drop_epoch") {
    lr_drop_epoch = sz();
  } else if (key == "refine_start_epoch") {
    refine_start_epoch = sz();
  } else if (key == "fc_weight_decay") {
    fc_weight_decay = dbl();
  } else if (key == "dropout_p") {
    dropout_p = dbl();
  } else if (key == "base_block_count") {
    base_block_count = sz();
  } else if (key == "extended_block_budget") {
    extended_block_budget = sz();
  } else if (key == "variant") {
    try {
      variant = parse_variant(value);
    } catch (const std::exception&) {
      throw ConfigError("unknown variant '" + value + "'");
    }
  } else if (key == "c_bar") {
    c_bar = sz();
  } else if (key == "curriculum") {
    curriculum = parse_criterion(value);
  } else if (key == "blending") {
    blending = parse_blending(value);
  } else if (key == "validation_fraction") {
    validation_fraction = dbl();
  } else if (key == "phase_epoch_cap") {
    phase_epoch_cap = sz();
  } else if (key == "augmentation") {
    if (value == "sampled")
      augmentation = AugmentMode::Sampled;
    else if (value == "full")
      augmentation = AugmentMode::Full;
    else
      throw ConfigError("augmentation must be sampled or full, got '" + value + "'");
  } else if (key == "model_seed") {
    model_seed = u64();
  } else if (key == "data_seed") {
    data_seed = u64();
  } else if (key == "mask_seed") {
    mask_seed = u64();
  } else if (key == "dropout_seed") {
    dropout_seed = u64();
  } else if (key == "synthetic_n") {
    synthetic_n = sz();
  } else if (key == "synthetic_seed") {
    synthetic_seed = u64();
  } else if (key == "test_fraction") {
    test_fraction = dbl();
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void TrainConfig::load_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + " line " + std::to_string(n) + ": expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      const std::string prefix = "configuration error: ";
      if (msg.starts_with(prefix)) msg.erase(0, prefix.size());
      throw ConfigError(source + " line " + std::to_string(n) + ": " + msg);
    }
  }
}

void TrainConfig::load_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << f.rdbuf();
  load_text(text.str(), path.string());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<Sample>& samples,
                                                                                 double fraction, Rng& rng) {
  std::vector<std::size_t> keep, held;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (static_cast<int>(samples[i].label()) == cls) members.push_back(i);
    shuffle(members.begin(), members.end(), rng);
    const auto n_held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(members.size())));
    held.insert(held.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_held));
    keep.insert(keep.end(), members.begin() + static_cast<std::ptrdiff_t>(n_held), members.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(held.begin(), held.end());
  return {keep, held};
}

std::vector<std::size_t> stratified_folds(const std::vector<Sample>& samples, std::size_t folds, Rng& rng) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (samples.size() < folds) throw ConfigError("fewer samples than folds");
  std::vector<std::size_t> fold(samples.size());
  std::size_t next = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (static_cast<int>(samples[i].label()) == cls) members.push_back(i);
    shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) fold[i] = next++ % folds;
  }
  return fold;
}

Tensor make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw UsageError("empty batch");
  const Shape& cs = samples[idx[0]].cube.shape();
  Tensor x({idx.size(), cs[0], cs[1], cs[2]});
  const std::size_t n = shape_numel(cs);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Tensor& c = samples[idx[k]].cube;
    if (c.shape() != cs) throw DimensionError("batch cubes differ in shape");
    std::copy(c.data().begin(), c.data().end(), x.data().begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return x;
}

TrainTestSplit train_test_split(const std::vector<Sample>& samples, const TrainConfig& config) {
  Rng rng(splitmix64(config.data_seed ^ 0x7E57ULL));
  const auto [keep, held] = stratified_split(samples, config.test_fraction, rng);
  TrainTestSplit out;
  for (std::size_t i : keep) out.train.push_back(samples[i]);
  for (std::size_t i : held) out.test.push_back(samples[i]);
  if (out.test.empty()) throw ConfigError("test split is empty");
  return out;
}

std::vector<Sample> synthetic_samples(const TrainConfig& config) {
  return preprocess_all(gen_synthetic(config.synthetic_n, config.synthetic_seed, config.cube_size), config.cube_size);
}

TrainResult train_procan(const std::vector<Sample>& train, const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  for (const auto& s : train)
    if (s.cube.shape() != Shape{config.cube_size, config.cube_size, config.cube_size})
      throw DimensionError("sample cube " + shape_str(s.cube.shape()) + " does not match cube_size " +
                           std::to_string(config.cube_size));
  return Trainer(train, config, log).run();
}

Evaluation evaluate(Network& net, const std::vector<Sample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return evaluate_indices(net, samples, idx);
}

MetricsRow evaluate_row(Network& net, const std::vector<Sample>& samples, std::string phase, std::size_t epoch,
                        std::string split) {
  return metrics_row(evaluate(net, samples).scores, std::move(phase), epoch, std::move(split));
}

Tensor ensemble_predict(std::vector<Network>& members, const Tensor& batch) {
  if (members.size() < 2) throw ConfigError("an ensemble needs at least two members");
  const NetworkSpec& first = members.front().spec();
  for (const auto& m : members)
    if (m.spec().input_channels != first.input_channels || m.spec().input_size != first.input_size)
      throw ConfigError("ensemble members expect different inputs");
  Tensor mean = members.front().predict_proba(batch);
  for (std::size_t k = 1; k < members.size(); ++k) mean += members[k].predict_proba(batch);
  for (auto& v : mean.data()) v /= static_cast<double>(members.size());
  return mean;
}

CvResult cross_validate(const std::vector<Sample>& samples, const TrainConfig& config, std::size_t folds,
                        std::ostream* log) {
  Rng rng(config.data_seed);
  const std::vector<std::size_t> fold = stratified_folds(samples, folds, rng);
  CvResult out;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Sample> train, test;
    for (std::size_t i = 0; i < samples.size(); ++i) (fold[i] == f ? test : train).push_back(samples[i]);
    if (log) *log << "fold " << f + 1 << "/" << folds << ": " << train.size() << " train, " << test.size() << " test\n";
    TrainResult r = train_procan(train, config, log);
    MetricsRow row = evaluate_row(r.net, test, "fold" + std::to_string(f + 1), config.total_epochs, "test");
    if (!row.auc && log) *log << "warning: fold " << f + 1 << " has a single class; AUC undefined\n";
    out.folds.push_back(std::move(row));
    out.logs.push_back(std::move(r.log));
  }
  auto summarize = [&](const std::string& name, auto get) {
    std::vector<double> v;
    for (const auto& row : out.folds)
      if (const std::optional<double> x = get(row)) v.push_back(100.0 * *x);
    if (v.empty()) {
      out.summary.emplace_back(name, "nan");
      return;
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out.summary.emplace_back(name, fmt(mean, "%.2f") + "±" + fmt(sd, "%.2f"));
  };
  summarize("accuracy", [](const MetricsRow& r) { return r.m.accuracy; });
  summarize("sensitivity", [](const MetricsRow& r) { return r.m.sensitivity; });
  summarize("precision", [](const MetricsRow& r) { return r.m.precision; });
  summarize("f1", [](const MetricsRow& r) { return r.m.f1; });
  summarize("auc", [](const MetricsRow& r) { return r.auc; });
  return out;
}

std::string train_log_csv(const TrainLog& log) {
  std::string s = "epoch,phase,block,p,train_loss,val_loss,val_accuracy,lr,augmented\n";
  for (const auto& e : log.epochs)
    s += std::to_string(e.epoch) + "," + e.phase + "," + std::to_string(e.block) + "," + fmt(e.p, "%.2f") + "," +
         fmt(e.train_loss) + "," + fmt(e.val_loss) + "," + fmt(e.val_accuracy) + "," + fmt(e.lr, "%g") + "," +
         (e.augmented ? "on" : "off") + "\n";
  return s;
}

std::string curves_csv(const TrainLog& log) {
  std::string s = "epoch,train_loss,val_loss,val_accuracy,val_auc\n";
  for (const auto& e : log.epochs)
    s += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss) + "," + fmt(e.val_accuracy) + "," +
         format_fixed(e.val_auc) + "\n";
  return s;
}

std::string growth_events_csv(const TrainLog& log) {
  std::string s = "block,epoch,val_loss_before,val_loss_at_insertion,val_loss_after_epoch,epoch_jump\n";
  for (const auto& g : log.growth)
    s += std::to_string(g.block) + "," + std::to_string(g.epoch) + "," + fmt(g.val_loss_before) + "," +
         fmt(g.val_loss_at_insertion) + "," + fmt(g.val_loss_after_epoch) + "," + fmt(g.epoch_jump()) + "\n";
  return s;
}

}  // namespace procan
