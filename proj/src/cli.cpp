#include "procan/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "procan/checkpoint.hpp"
#include "procan/errors.hpp"
#include "procan/gradcheck_suite.hpp"
#include "procan/trainer.hpp"

namespace procan {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string dataset;
  bool synthetic = false;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool desk_scale = false;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& default_out) {
  o.out = default_out;
  auto* ds = cmd->add_option("--dataset", o.dataset, "Dataset directory (index.csv + volumes/)");
  auto* syn = cmd->add_flag("--synthetic", o.synthetic, "Generate the synthetic dataset in memory");
  ds->excludes(syn);
  cmd->add_option("--config", o.config, "key = value configuration file");
  cmd->add_option("--seed", o.seed, "Derive every seed from this number");
  cmd->add_option("--out", o.out, "Run directory");
  cmd->add_flag("--desk-scale", o.desk_scale, "Use the desk-scale preset");
  cmd->add_flag("-v,--verbose", o.verbose, "Print per-epoch progress");
}

TrainConfig resolve_config(const CommonOptions& o) {
  TrainConfig cfg = o.desk_scale || o.synthetic ? TrainConfig::desk() : TrainConfig::full();
  if (!o.config.empty()) cfg.load_file(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  cfg.validate();
  return cfg;
}

std::vector<Sample> load_samples(const CommonOptions& o, const TrainConfig& cfg, std::ostream& out) {
  if (o.synthetic) return synthetic_samples(cfg);
  if (o.dataset.empty()) throw UsageError("pass --dataset DIR or --synthetic");
  std::ostringstream log;
  const Dataset d = load_dataset(o.dataset, &log);
  out << log.str();
  return preprocess_all(d, cfg.cube_size);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << content;
}

std::string scores_csv(const std::vector<Sample>& samples, const ScoredSet& s) {
  std::string text = "id,label,score\n";
  char buf[64];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", s.scores[i]);
    text += samples[i].record.id + "," + std::to_string(s.labels[i]) + "," + buf + "\n";
  }
  return text;
}

std::string notes_text(const TrainLog& log) {
  std::string s;
  for (const auto& n : log.notes) s += n + "\n";
  return s;
}

std::string mean_text(const std::vector<double>& v) {
  if (v.empty()) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
  return buf;
}

struct RunOutcome {
  MetricsRow test;
  TrainLog log;
};

// Trains on the training split, evaluates on the test split, writes the run files.
RunOutcome train_and_write(const TrainConfig& cfg, const TrainTestSplit& data, const fs::path& dir, bool verbose,
                           std::ostream& out) {
  fs::create_directories(dir);
  write_file(dir / "config.resolved", cfg.resolved());
  TrainResult r = train_procan(data.train, cfg, verbose ? &out : nullptr);
  const Evaluation ev = evaluate(r.net, data.test);
  MetricsRow test = metrics_row(ev.scores, "final", cfg.total_epochs, "test");
  const MetricsRow train_row = evaluate_row(r.net, data.train, "final", cfg.total_epochs, "train");
  write_file(dir / "train_log.csv", train_log_csv(r.log));
  write_file(dir / "curves.csv", curves_csv(r.log));
  write_file(dir / "growth_events.csv", growth_events_csv(r.log));
  write_file(dir / "metrics.csv", std::string(kMetricsHeader) + "\n" + to_csv(train_row) + "\n" + to_csv(test) + "\n");
  write_file(dir / "scores.csv", scores_csv(data.test, ev.scores));
  write_file(dir / "notes.txt", notes_text(r.log));
  Checkpoint ckpt{std::move(r.net), std::nullopt, {}, nlohmann::json::object()};
  ckpt.meta["config"] = cfg.resolved();
  ckpt.meta["epochs"] = cfg.total_epochs;
  save_checkpoint(dir / "model.json", ckpt);
  return RunOutcome{std::move(test), std::move(r.log)};
}

int cmd_train(const CommonOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig cfg = resolve_config(o);
  const TrainTestSplit data = train_test_split(load_samples(o, cfg, out), cfg);
  out << "training on " << data.train.size() << " samples, testing on " << data.test.size() << "\n";
  const RunOutcome r = train_and_write(cfg, data, o.out, o.verbose, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << kMetricsHeader << "\n" << to_csv(r.test) << "\n";
  out << "wrote " << o.out << " in " << format_fixed(secs, 1) << " s\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, bool whole, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  TrainConfig cfg = o.desk_scale || o.synthetic ? TrainConfig::desk() : TrainConfig::full();
  if (ckpt.meta.contains("config")) cfg.load_text(ckpt.meta["config"].get<std::string>(), checkpoint);
  if (!o.config.empty()) cfg.load_file(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  cfg.validate();
  const std::vector<Sample> all = load_samples(o, cfg, out);
  // Default: the held-out split of the training run. --whole scores every record.
  const std::vector<Sample> test = whole ? all : train_test_split(all, cfg).test;
  const Evaluation ev = evaluate(ckpt.net, test);
  const std::size_t epoch = ckpt.meta.value("epochs", std::size_t{0});
  const MetricsRow row = metrics_row(ev.scores, "eval", epoch, "test");
  fs::create_directories(o.out);
  write_file(fs::path(o.out) / "config.resolved", cfg.resolved());
  write_file(fs::path(o.out) / "train_log.csv", train_log_csv({}));
  write_file(fs::path(o.out) / "curves.csv", curves_csv({}));
  write_file(fs::path(o.out) / "metrics.csv", std::string(kMetricsHeader) + "\n" + to_csv(row) + "\n");
  write_file(fs::path(o.out) / "scores.csv", scores_csv(test, ev.scores));
  out << kMetricsHeader << "\n" << to_csv(row) << "\n";
  return 0;
}

int cmd_cv(const CommonOptions& o, std::size_t folds, std::ostream& out) {
  const TrainConfig cfg = resolve_config(o);
  const std::vector<Sample> all = load_samples(o, cfg, out);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  write_file(dir / "config.resolved", cfg.resolved());
  const CvResult cv = cross_validate(all, cfg, folds, o.verbose ? &out : nullptr);
  std::string metrics = std::string(kMetricsHeader) + "\n", log = "fold,", curves = "fold,";
  log += train_log_csv({});
  curves += curves_csv({});
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    metrics += to_csv(cv.folds[f]) + "\n";
    const std::string tag = std::to_string(f + 1) + ",";
    std::istringstream l(train_log_csv(cv.logs[f])), c(curves_csv(cv.logs[f]));
    std::string line;
    std::getline(l, line);
    while (std::getline(l, line)) log += tag + line + "\n";
    std::getline(c, line);
    while (std::getline(c, line)) curves += tag + line + "\n";
    if (!cv.folds[f].auc) out << "warning: fold " << f + 1 << " has a single class; AUC undefined\n";
  }
  std::string summary = "metric,value\n";
  for (const auto& [name, value] : cv.summary) summary += name + "," + value + "\n";
  write_file(dir / "metrics.csv", metrics);
  write_file(dir / "train_log.csv", log);
  write_file(dir / "curves.csv", curves);
  write_file(dir / "cv_summary.csv", summary);
  out << metrics << summary;
  return 0;
}

std::vector<std::string> default_arms(const std::string& axis) {
  if (axis == "blending") return {"none", "scalar", "bernoulli"};
  if (axis == "curriculum") return {"none", "rating", "diameter"};
  if (axis == "variant") return {"nonlocal", "nonlocal_se", "dual_attention", "can"};
  if (axis == "c_bar") return {"1", "2", "4", "8"};
  if (axis == "blocks") return {"3", "4", "5", "6"};
  throw UsageError("unknown ablation axis '" + axis + "' (blending, curriculum, variant, c_bar, blocks)");
}

int cmd_ablate(const CommonOptions& o, const std::string& axis, std::vector<std::string> values, std::ostream& out) {
  const TrainConfig base = resolve_config(o);
  if (values.empty()) values = default_arms(axis);
  const std::string key = axis == "blocks" ? "base_block_count" : axis;
  const std::vector<Sample> all = load_samples(o, base, out);
  const TrainTestSplit data = train_test_split(all, base);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  write_file(dir / "config.resolved", base.resolved());
  std::string metrics = std::string(kMetricsHeader) + "\n", log = "arm,", curves = "arm,";
  log += train_log_csv({});
  curves += curves_csv({});
  std::string table = "arm,test_accuracy,test_auc,mean_epoch_jump,mean_insertion_jump\n";
  for (const auto& v : values) {
    TrainConfig cfg = base;
    cfg.set(key, v);
    cfg.validate();
    const std::string arm = axis + "=" + v;
    out << "arm " << arm << "\n";
    const RunOutcome r = train_and_write(cfg, data, dir / (axis + "_" + v), o.verbose, out);
    MetricsRow row = r.test;
    row.phase = arm;
    metrics += to_csv(row) + "\n";
    std::istringstream l(train_log_csv(r.log)), c(curves_csv(r.log));
    std::string line;
    std::getline(l, line);
    while (std::getline(l, line)) log += arm + "," + line + "\n";
    std::getline(c, line);
    while (std::getline(c, line)) curves += arm + "," + line + "\n";
    std::vector<double> epoch_jumps, insertion_jumps;
    for (const auto& g : r.log.growth) {
      epoch_jumps.push_back(g.epoch_jump());
      insertion_jumps.push_back(g.val_loss_at_insertion - g.val_loss_before);
    }
    table += arm + "," + format_fixed(row.m.accuracy) + "," + format_fixed(row.auc) + "," + mean_text(epoch_jumps) +
             "," + mean_text(insertion_jumps) + "\n";
  }
  write_file(dir / "metrics.csv", metrics);
  write_file(dir / "train_log.csv", log);
  write_file(dir / "curves.csv", curves);
  write_file(dir / "ablation.csv", table);
  out << table;
  return 0;
}

int cmd_ensemble(const CommonOptions& o, const std::vector<std::size_t>& sizes, std::ostream& out) {
  const TrainConfig base = resolve_config(o);
  if (sizes.size() < 2) throw ConfigError("an ensemble needs at least two members");
  const TrainTestSplit data = train_test_split(load_samples(o, base, out), base);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  write_file(dir / "config.resolved", base.resolved());
  std::vector<Network> members;
  std::string metrics = std::string(kMetricsHeader) + "\n";
  for (std::size_t k : sizes) {
    if (k <= base.extended_block_budget)
      throw ConfigError("member with " + std::to_string(k) + " blocks leaves no base blocks");
    TrainConfig cfg = base;
    cfg.base_block_count = k - base.extended_block_budget;
    cfg.validate();
    out << "member ProCAN-" << k << "\n";
    const fs::path mdir = dir / ("member_" + std::to_string(k));
    train_and_write(cfg, data, mdir, o.verbose, out);
    members.push_back(load_checkpoint(mdir / "model.json").net);
    MetricsRow row = evaluate_row(members.back(), data.test, "member" + std::to_string(k), base.total_epochs, "test");
    metrics += to_csv(row) + "\n";
  }
  std::vector<std::size_t> idx(data.test.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Tensor p = ensemble_predict(members, make_batch(data.test, idx));
  ScoredSet s;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    s.scores.push_back(p[i]);
    s.labels.push_back(static_cast<int>(data.test[i].label()));
  }
  metrics += to_csv(metrics_row(s, "ensemble", base.total_epochs, "test")) + "\n";
  write_file(dir / "metrics.csv", metrics);
  write_file(dir / "train_log.csv", train_log_csv({}));
  write_file(dir / "curves.csv", curves_csv({}));
  write_file(dir / "scores.csv", scores_csv(data.test, s));
  out << metrics;
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport report = op_gradient_suite(20, seed);
  report.entries.push_back(network_gradient_check(NetworkSpec::desk_with(2, 0), seed));
  report.entries.back().name = "network (2 desk blocks)";
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string csv = "name,max_rel_error,coordinates\n";
  char buf[160];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%-26s %.3e  %zu\n", e.name.c_str(), e.max_rel_error, e.checked);
    out << buf;
    std::snprintf(buf, sizeof buf, "%s,%.6e,%zu\n", e.name.c_str(), e.max_rel_error, e.checked);
    csv += buf;
  }
  const double worst = report.worst();
  std::snprintf(buf, sizeof buf, "max relative error %.3e (%s 1e-5) in %.1f s\n", worst, worst < 1e-5 ? "<" : ">=", secs);
  out << buf;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "gradcheck.csv", csv);
  }
  return worst < 1e-5 ? 0 : 1;
}

int cmd_gen_data(const std::string& dir, std::size_t n, std::uint64_t seed, std::size_t size, std::ostream& out) {
  const Dataset d = gen_synthetic(n, seed, size);
  write_dataset(dir, d);
  std::size_t malignant = 0;
  for (const auto& r : d.records) malignant += r.label == Label::Malignant;
  out << "wrote " << n << " records (" << malignant << " malignant) to " << dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ProCAN lung-nodule classifier: training, evaluation and checks"};
  app.require_subcommand(1);

  CommonOptions train_o, eval_o, cv_o, ablate_o, ens_o;
  auto* train = app.add_subcommand("train", "Curriculum + progressive-growing training run");
  add_common(train, train_o, "runs/train");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test set");
  add_common(eval, eval_o, "runs/eval");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "model.json written by train")->required();
  bool whole = false;
  eval->add_flag("--whole", whole, "Score every record instead of the held-out split");

  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_common(cv, cv_o, "runs/cv");
  std::size_t folds = 10;
  cv->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 100));

  auto* ablate = app.add_subcommand("ablate", "Sweep one axis with all seeds shared");
  add_common(ablate, ablate_o, "runs/ablate");
  std::string axis;
  std::vector<std::string> values;
  ablate->add_option("axis", axis, "blending | curriculum | variant | c_bar | blocks")->required();
  ablate->add_option("--values", values, "Arms to run (default: the full sweep)")->delimiter(',');

  auto* ensemble = app.add_subcommand("ensemble", "Train members of different depth and average them");
  add_common(ensemble, ens_o, "runs/ensemble");
  std::vector<std::size_t> sizes{6, 7, 8};
  ensemble->add_option("--members", sizes, "Total CAN blocks per member")->delimiter(',');

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  std::uint64_t grad_seed = 1;
  std::string grad_out;
  grad->add_option("--seed", grad_seed, "Suite seed");
  grad->add_option("--out", grad_out, "Directory for gradcheck.csv");

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset to disk");
  std::string gen_out;
  std::size_t gen_n = 500, gen_size = 16;
  std::uint64_t gen_seed = 7;
  gen->add_option("--out", gen_out, "Dataset directory")->required();
  gen->add_option("--n", gen_n, "Number of nodules");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--size", gen_size, "Cube size (16 or 32)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train) return cmd_train(train_o, out);
    if (*eval) return cmd_eval(eval_o, checkpoint, whole, out);
    if (*cv) return cmd_cv(cv_o, folds, out);
    if (*ablate) return cmd_ablate(ablate_o, axis, values, out);
    if (*ensemble) return cmd_ensemble(ens_o, sizes, out);
    if (*grad) return cmd_gradcheck(grad_seed, grad_out, out);
    if (*gen) return cmd_gen_data(gen_out, gen_n, gen_seed, gen_size, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace procan
