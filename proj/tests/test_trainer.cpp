#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "procan/cli.hpp"
#include "procan/errors.hpp"
#include "procan/trainer.hpp"

using namespace procan;
namespace fs = std::filesystem;

namespace {

// Two base blocks, one extended block, phases capped at 2 epochs.
TrainConfig tiny() {
  TrainConfig c = TrainConfig::desk();
  c.base_block_count = 2;
  c.extended_block_budget = 1;
  c.total_epochs = 14;
  c.batch_size = 8;
  c.phase_epoch_cap = 2;
  c.lr_drop_epoch = 5;
  c.refine_start_epoch = 10;
  c.synthetic_n = 40;
  c.validation_fraction = 0.2;
  return c;
}

const std::vector<Sample>& tiny_samples() {
  static const std::vector<Sample> s = synthetic_samples(tiny());
  return s;
}

std::string phase_string(const TrainLog& log) {
  std::string s;
  for (const auto& e : log.epochs) s += e.phase.substr(0, 1);
  return s;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::vector<std::string> full{"procan"};
  full.insert(full.end(), args.begin(), args.end());
  return run_cli(full, out, err);
}

}  // namespace

TEST_CASE("default configuration carries the reference schedule") {
  const TrainConfig c = TrainConfig::full();
  CHECK(c.total_epochs == 60);
  CHECK(c.batch_size == 256);
  CHECK(c.lr_initial == 1e-3);
  CHECK(c.lr_after == 1e-4);
  CHECK(c.lr_drop_epoch == 20);
  CHECK(c.refine_start_epoch == 51);
  CHECK(c.fc_weight_decay == 1e-4);
  CHECK(c.dropout_p == 0.5);
  CHECK(c.extended_block_budget == 3);
  CHECK(c.validation_fraction == 0.1);
  CHECK_NOTHROW(c.validate());
  CHECK_NOTHROW(TrainConfig::desk().validate());
}

TEST_CASE("resolved config round-trips through load_text") {
  TrainConfig a = tiny();
  a.set_seed(99);
  a.blending = Blending::Scalar;
  a.curriculum = DifficultyCriterion::Rating;
  a.variant = Variant::DualAttention;
  TrainConfig b = TrainConfig::full();
  b.load_text(a.resolved());
  CHECK(b.resolved() == a.resolved());
}

TEST_CASE("configuration errors") {
  TrainConfig c = tiny();
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("total_epochs", "ten"), ConfigError);
  CHECK_THROWS_AS(c.set("blending", "fade"), ConfigError);
  CHECK_THROWS_AS(c.load_text("total_epochs 5\n"), ConfigError);
  try {
    c.load_text("# comment\nbatch_size = 8\nbogus = 1\n", "cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "configuration error: cfg line 3: unknown configuration key 'bogus'");
  }
  TrainConfig bad = tiny();
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = tiny();
  bad.cube_size = 32;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("seed derivation is deterministic and spreads seeds") {
  TrainConfig a = tiny(), b = tiny();
  a.set_seed(5);
  b.set_seed(5);
  CHECK(a.resolved() == b.resolved());
  const std::set<std::uint64_t> seeds{a.model_seed, a.data_seed, a.mask_seed, a.dropout_seed};
  CHECK(seeds.size() == 4);
  b.set_seed(6);
  CHECK(a.model_seed != b.model_seed);
}

TEST_CASE("stratified split and folds partition the samples") {
  const auto& s = tiny_samples();
  Rng rng(3);
  const auto [keep, held] = stratified_split(s, 0.25, rng);
  std::set<std::size_t> all(keep.begin(), keep.end());
  for (auto i : held) CHECK(all.insert(i).second);
  CHECK(all.size() == s.size());
  std::size_t held_pos = 0, pos = 0;
  for (auto i : held) held_pos += s[i].label() == 1.0;
  for (const auto& x : s) pos += x.label() == 1.0;
  CHECK(std::abs(static_cast<double>(held_pos) - 0.25 * pos) <= 1.0);

  Rng frng(4);
  const auto fold = stratified_folds(s, 4, frng);
  REQUIRE(fold.size() == s.size());
  std::vector<std::size_t> count(4, 0), count_pos(4, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(fold[i] < 4);
    ++count[fold[i]];
    count_pos[fold[i]] += s[i].label() == 1.0;
  }
  for (std::size_t f = 0; f < 4; ++f) {
    CHECK(std::abs(static_cast<double>(count[f]) - s.size() / 4.0) <= 1.0);
    CHECK(std::abs(static_cast<double>(count_pos[f]) - pos / 4.0) <= 1.0);
  }

  const TrainTestSplit a = train_test_split(s, tiny()), b = train_test_split(s, tiny());
  CHECK(a.train.size() + a.test.size() == s.size());
  REQUIRE(a.test.size() == b.test.size());
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].record.id == b.test[i].record.id);
  std::set<std::string> train_ids;
  for (const auto& x : a.train) train_ids.insert(x.record.id);
  for (const auto& x : a.test) CHECK(train_ids.count(x.record.id) == 0);
}

TEST_CASE("a tiny run follows the epoch budget, schedule and phase order") {
  const TrainConfig c = tiny();
  const auto split = train_test_split(tiny_samples(), c);
  const TrainResult r = train_procan(split.train, c);
  const auto& ep = r.log.epochs;
  REQUIRE(ep.size() == c.total_epochs);
  for (std::size_t i = 0; i < ep.size(); ++i) {
    CHECK(ep[i].epoch == i + 1);
    CHECK(ep[i].lr == (ep[i].epoch < c.lr_drop_epoch ? c.lr_initial : c.lr_after));
    CHECK(ep[i].augmented == (ep[i].epoch < c.refine_start_epoch));
    CHECK(std::isfinite(ep[i].train_loss));
    CHECK(std::isfinite(ep[i].val_loss));
  }
  CHECK(std::regex_match(phase_string(r.log), std::regex("e{1,2}f{1,2}tttts{1,2}r*")));
  int step = 0;
  for (const auto& e : ep)
    if (e.phase == "transition") CHECK(e.p == 0.25 * ++step);
  REQUIRE(r.log.growth.size() == 1);
  CHECK(r.log.growth[0].block == 1);
  CHECK(ep[r.log.growth[0].epoch - 1].phase == "transition");
  CHECK(ep[r.log.growth[0].epoch - 2].val_loss == r.log.growth[0].val_loss_before);
  CHECK(ep[r.log.growth[0].epoch - 1].val_loss == r.log.growth[0].val_loss_after_epoch);
  REQUIRE(r.net.extended().size() == 1);
  CHECK(r.net.extended()[0].state.phase == GrowthPhase::Final);

  SUBCASE("identical seeds give identical logs") {
    const TrainResult again = train_procan(split.train, c);
    CHECK(train_log_csv(again.log) == train_log_csv(r.log));
    CHECK(growth_events_csv(again.log) == growth_events_csv(r.log));
  }
}

TEST_CASE("no curriculum and no growth leaves only full and remainder epochs") {
  TrainConfig c = tiny();
  c.curriculum = DifficultyCriterion::None;
  c.extended_block_budget = 0;
  c.total_epochs = 6;
  c.refine_start_epoch = 7;
  const auto split = train_test_split(tiny_samples(), c);
  const TrainResult r = train_procan(split.train, c);
  CHECK(std::regex_match(phase_string(r.log), std::regex("f{1,2}r+")));
  CHECK(r.log.growth.empty());
  CHECK(r.net.extended().empty());
}

TEST_CASE("a budget that ends mid-transition finalizes the block") {
  TrainConfig c = tiny();
  c.total_epochs = 6;
  c.refine_start_epoch = 7;
  const auto split = train_test_split(tiny_samples(), c);
  const TrainResult r = train_procan(split.train, c);
  CHECK(r.log.epochs.size() == 6);
  REQUIRE(r.net.extended().size() == 1);
  CHECK(r.net.extended()[0].state.phase == GrowthPhase::Final);
  bool noted = false;
  for (const auto& n : r.log.notes) noted |= n.find("budget") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("an empty easy set asks for a different criterion") {
  std::vector<Sample> s = tiny_samples();
  for (auto& x : s) x.record.diameter_mm = 8.0;
  CHECK_THROWS_AS(train_procan(s, tiny()), ConfigError);
  TrainConfig c = tiny();
  c.curriculum = DifficultyCriterion::None;
  c.total_epochs = 2;
  c.refine_start_epoch = 3;
  c.extended_block_budget = 0;
  CHECK_NOTHROW(train_procan(s, c));
}

TEST_CASE("evaluation is repeatable and agrees with the metrics module") {
  const TrainConfig c = tiny();
  Rng rng(c.model_seed);
  Network net(c.network_spec(), rng);
  const auto& s = tiny_samples();
  const Evaluation a = evaluate(net, s), b = evaluate(net, s);
  CHECK(a.scores.scores == b.scores.scores);
  CHECK(a.loss == b.loss);
  const MetricsRow row = evaluate_row(net, s, "final", 3, "test");
  CHECK(to_csv(row) == to_csv(metrics_row(a.scores, "final", 3, "test")));
  double bce = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = a.scores.scores[i];
    bce -= a.scores.labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  CHECK(a.loss == doctest::Approx(bce / s.size()).epsilon(1e-9));
}

TEST_CASE("ensemble averages member probabilities") {
  const TrainConfig c = tiny();
  const auto& s = tiny_samples();
  const Tensor batch = make_batch(s, {0, 1, 2, 3});
  Rng r1(1), r2(1);
  std::vector<Network> same{Network(c.network_spec(), r1), Network(c.network_spec(), r2)};
  const Tensor single = same[0].predict_proba(batch);
  const Tensor mean = ensemble_predict(same, batch);
  for (std::size_t i = 0; i < 4; ++i) CHECK(mean[i] == doctest::Approx(single[i]).epsilon(1e-15));

  // Zero head weights pin each member to its bias.
  std::vector<Network> fixed{Network(c.network_spec(), r1), Network(c.network_spec(), r2)};
  const double logits[] = {std::log(0.2 / 0.8), std::log(0.8 / 0.2)};
  for (int m = 0; m < 2; ++m) {
    for (auto& w : fixed[m].fc_weight().value.data()) w = 0.0;
    fixed[m].fc_bias().value[0] = logits[m];
  }
  const Tensor half = ensemble_predict(fixed, batch);
  for (std::size_t i = 0; i < 4; ++i) CHECK(half[i] == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<Network> one{Network(c.network_spec(), r1)};
  CHECK_THROWS_AS(ensemble_predict(one, batch), ConfigError);
  TrainConfig other = c;
  other.base_block_count = 3;
  std::vector<Network> mixed{Network(c.network_spec(), r1), Network(other.network_spec(), r2)};
  CHECK_NOTHROW(ensemble_predict(mixed, batch));
  TrainConfig big = TrainConfig::full();
  std::vector<Network> wrong{Network(c.network_spec(), r1), Network(big.network_spec(), r2)};
  CHECK_THROWS_AS(ensemble_predict(wrong, batch), ConfigError);
}

TEST_CASE("cross-validation reports one row per fold and a summary") {
  TrainConfig c = tiny();
  c.curriculum = DifficultyCriterion::None;
  c.extended_block_budget = 0;
  c.total_epochs = 2;
  c.refine_start_epoch = 3;
  const CvResult cv = cross_validate(tiny_samples(), c, 3);
  REQUIRE(cv.folds.size() == 3);
  CHECK(cv.logs.size() == 3);
  REQUIRE(!cv.summary.empty());
  for (const auto& [name, value] : cv.summary) CHECK(std::regex_match(value, std::regex(R"(\d+\.\d\d±\d+\.\d\d)")));
  CHECK_THROWS_AS(cross_validate(tiny_samples(), c, 1), ConfigError);
}

TEST_CASE("command line") {
  const fs::path dir = fs::temp_directory_path() / "procan_test_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK(cli({"train", "--bogus"}) != 0);
  CHECK(cli({"frobnicate"}) != 0);
  CHECK(cli({"gen-data", "--out", (dir / "data").string(), "--n", "40", "--seed", "3"}) == 0);
  CHECK(fs::exists(dir / "data" / "index.csv"));

  std::ofstream(dir / "bad.cfg") << "bogus = 1\n";
  CHECK(cli({"train", "--synthetic", "--config", (dir / "bad.cfg").string()}) == 1);

  std::ofstream(dir / "c.cfg") << "base_block_count = 2\nextended_block_budget = 1\nbatch_size = 8\n"
                               << "total_epochs = 8\nphase_epoch_cap = 1\nlr_drop_epoch = 3\nrefine_start_epoch = 7\n";
  const std::string data = (dir / "data").string(), cfg = (dir / "c.cfg").string();
  REQUIRE(cli({"train", "--dataset", data, "--desk-scale", "--config", cfg, "--out", (dir / "run").string()}) == 0);
  for (const char* f : {"config.resolved", "train_log.csv", "curves.csv", "growth_events.csv", "metrics.csv",
                        "scores.csv", "model.json"})
    CHECK(fs::exists(dir / "run" / f));
  const std::string metrics = read_file(dir / "run" / "metrics.csv");
  CHECK(metrics.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);

  REQUIRE(cli({"eval", "--dataset", data, "--desk-scale", "--checkpoint", (dir / "run" / "model.json").string(),
               "--out", (dir / "eval").string()}) == 0);
  const std::string test_row = metrics.substr(metrics.find("final,8,test"));
  const std::string eval = read_file(dir / "eval" / "metrics.csv");
  CHECK(eval.substr(eval.find("eval,8,test") + 4) == test_row.substr(5));
  fs::remove_all(dir);
}
