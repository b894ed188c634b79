#include "ldsort/bench.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace ldsort;

namespace {

TrialRecord record_with(std::vector<double> train_acc, std::vector<double> val_acc = {}) {
  TrialRecord r;
  for (std::size_t e = 0; e < train_acc.size(); ++e) {
    r.epochs.push_back({train_acc[e], 0.0, val_acc.empty() ? 0.0 : val_acc[e], 0.0});
  }
  return r;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.train = "annulus:60,3";
  cfg.hidden = {0};
  cfg.batch_sizes = {10};
  cfg.learning_rates = {0.5};
  cfg.trials_per_cell = 2;
  cfg.epochs = 6;
  cfg.base_seed = 11;
  return cfg;
}

Experiment small_experiment(ExperimentConfig cfg) {
  auto [train, val] = split(synth_annulus(60, 1.0, 2.0, 0.05, 3), 0.25, 5);
  return Experiment(std::move(cfg), std::move(train), std::move(val));
}

}  // namespace

TEST_CASE("threshold_accuracy is the min of per-record maxima") {
  const std::vector<TrialRecord> rs{record_with({0.5, 0.91, 0.9}), record_with({0.95}), record_with({0.99, 0.2})};
  CHECK(threshold_accuracy(rs) == 0.91);
  CHECK(threshold_accuracy(std::span(rs).first(1)) == 0.91);
  CHECK_THROWS_AS(threshold_accuracy(std::span<const TrialRecord>{}), Error);
}

TEST_CASE("threshold_accuracy matches a two-loop oracle and every record reaches it") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TrialRecord> rs(1 + rng() % 6);
    for (auto& r : rs) {
      std::vector<double> acc(1 + rng() % 10);
      for (auto& a : acc) a = u(rng);
      r = record_with(acc);
    }
    double oracle = 2.0;
    for (const auto& r : rs) {
      double best = -1.0;
      for (const auto& e : r.epochs) best = std::max(best, e.train_accuracy);
      oracle = std::min(oracle, best);
    }
    const double t = threshold_accuracy(rs);
    CHECK(t == oracle);
    bool equal_somewhere = false;
    for (const auto& r : rs) {
      const int e = epochs_to_threshold(r, t);
      CHECK(e >= 1);
      CHECK(e <= static_cast<int>(r.epochs.size()));
      double best = -1.0;
      for (const auto& m : r.epochs) best = std::max(best, m.train_accuracy);
      CHECK(t <= best);
      equal_somewhere = equal_somewhere || best == t;
    }
    CHECK(equal_somewhere);
  }
}

TEST_CASE("epochs_to_threshold finds the first crossing") {
  const auto r = record_with({0.5, 0.8, 0.93, 0.92});
  CHECK(epochs_to_threshold(r, 0.9) == 3);
  CHECK(epochs_to_threshold(r, 0.0) == 1);
  try {
    epochs_to_threshold(r, 1.1);
    FAIL("expected NeverReached");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NeverReached);
  }
}

TEST_CASE("min_validation_error_percent uses the best epoch") {
  CHECK(min_validation_error_percent(record_with({0, 0, 0}, {0.7, 0.85, 0.8})) == doctest::Approx(15.0));
}

TEST_CASE("mean_difference against hand arithmetic") {
  const std::vector<double> lda{10, 12, 14};
  const std::vector<double> rand{20, 24, 22};
  const auto d = mean_difference(lda, rand);
  CHECK(d.mean_lda == 12.0);
  CHECK(d.mean_rand == 22.0);
  CHECK(d.diff == 10.0);
  // Both sample variances are 4, so SE = sqrt(4/3 + 4/3).
  CHECK(d.se == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(d.significant);

  const std::vector<double> close{12.5, 11.5, 12};
  CHECK_FALSE(mean_difference(lda, close).significant);
  const std::vector<double> one{5};
  const auto single = mean_difference(one, one);
  CHECK(single.se == 0.0);
  CHECK_FALSE(single.significant);
}

TEST_CASE("summarize_cell pools both schemes for the threshold") {
  const std::vector<TrialRecord> lda{record_with({0.6, 0.9, 0.95}, {0.5, 0.9, 0.88}),
                                     record_with({0.85, 0.92}, {0.6, 0.91})};
  const std::vector<TrialRecord> rand{record_with({0.3, 0.5, 0.7, 0.9}, {0.3, 0.5, 0.7, 0.8}),
                                      record_with({0.4, 0.6, 0.88, 0.91}, {0.4, 0.6, 0.85, 0.86})};
  const auto s = summarize_cell(500, 0.001, lda, rand);
  CHECK(s.threshold_accuracy == 0.9);
  CHECK(s.mu_lda == 2.0);
  CHECK(s.mu_rand == 4.0);
  CHECK(s.mu_diff == 2.0);
  CHECK(s.mu_diff_se == 0.0);
  CHECK(s.err_lda == doctest::Approx((10.0 + 9.0) / 2.0));
  CHECK(s.err_rand == doctest::Approx((20.0 + 14.0) / 2.0));
  CHECK(s.err_diff == doctest::Approx(7.5));
  CHECK(s.mu_diff_se >= 0.0);
  CHECK(s.err_diff_se >= 0.0);
}

TEST_CASE("experiment config validation and JSON round trip") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.trials_per_cell = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.batch_sizes.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = small_config();
  cfg.extra_multiplier = 2;
  cfg.activation = Activation::ReLU;
  const auto back = experiment_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"train", "annulus"}, {"trials_per_cell", 0}}), Error);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"train", "annulus"}, {"precision", "float16"}}), Error);
}

TEST_CASE("identical schemes and seeds give a zero difference") {
  auto cfg = small_config();
  cfg.lda_scheme = InitScheme::Orthogonal;
  cfg.baseline = InitScheme::Orthogonal;
  cfg.baseline_seed_offset = 0;
  cfg.hidden = {5};
  const auto exp = small_experiment(cfg);
  const auto cell = exp.run_cell(10, 0.5);
  CHECK(cell.summary.mu_diff == 0.0);
  CHECK(cell.summary.err_diff == 0.0);
}

TEST_CASE("cells are reproducible and independent of the worker count") {
  auto cfg = small_config();
  const auto serial = small_experiment(cfg).run_cell(10, 0.5);
  cfg.jobs = 3;
  const auto parallel = small_experiment(cfg).run_cell(10, 0.5);
  REQUIRE(serial.trials.lda.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(trial_csv(serial.trials.lda[t]) == trial_csv(parallel.trials.lda[t]));
    CHECK(trial_csv(serial.trials.rand[t]) == trial_csv(parallel.trials.rand[t]));
  }
  CHECK(to_json(serial.summary) == to_json(parallel.summary));
  CHECK(serial.trials.lda[0].seed == 11);
  CHECK(serial.trials.rand[1].seed == 11 + 1'000'000 + 1);
}

TEST_CASE("run_grid covers the cross product and persists re-derivable CSVs") {
  auto cfg = small_config();
  cfg.batch_sizes = {10, 30};
  cfg.learning_rates = {0.5, 0.1};
  cfg.results_dir = test::temp_dir("grid");
  const auto exp = small_experiment(cfg);
  const auto cells = exp.run_grid();
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].learning_rate == 0.5);
  CHECK(cells[0].batch_size == 10);
  CHECK(cells[1].batch_size == 30);
  CHECK(cells[2].learning_rate == 0.1);
  for (const auto& c : cells) {
    const auto again = summary_from_csvs(cfg.results_dir, c.batch_size, c.learning_rate, cfg.trials_per_cell);
    CHECK(to_json(again) == to_json(c));
  }
  CHECK(std::filesystem::exists(cfg.results_dir / "summary.json"));
  CHECK(std::filesystem::exists(cfg.results_dir / "summary.csv"));
  const auto single = exp.run_cell(30, 0.1).summary;
  CHECK(to_json(single) == to_json(cells[3]));

  const std::string table = summary_table(cells, false);
  CHECK(table.find("Batch Size 10") != std::string::npos);
  CHECK(table.find("Batch Size 30") != std::string::npos);
}

TEST_CASE("size_match finds the reference architecture itself") {
  auto cfg = small_config();
  const auto exp = small_experiment(cfg);
  const auto h = static_cast<Index>(exp.hyperplanes().game.hyperplanes.size());
  REQUIRE(h >= 1);
  const std::vector<Index> candidates{h};
  const auto m = exp.size_match(10, 0.5, candidates, InitScheme::SortingGame);
  REQUIRE(m.matched.has_value());
  CHECK(*m.matched == h);
  REQUIRE(m.candidates.size() == 1);
  CHECK(m.candidates[0].second == m.reference_accuracy);
  const std::vector<Index> descending{3, 2};
  CHECK_THROWS_AS(exp.size_match(10, 0.5, descending), Error);
}

TEST_CASE("hyperplanes come from the training split and can be supplied") {
  auto cfg = small_config();
  const auto exp = small_experiment(cfg);
  CHECK(exp.hyperplanes().dataset_hash == dataset_hash(exp.train_set()));
  const auto [train, val] = split(synth_annulus(60, 1.0, 2.0, 0.05, 3), 0.25, 5);
  const Experiment supplied(cfg, train, val, exp.hyperplanes());
  CHECK(supplied.hyperplanes().game.hyperplanes.size() == exp.hyperplanes().game.hyperplanes.size());
  const auto a = exp.run_trial(InitScheme::SortingGame, 10, 0.5, 3);
  const auto b = supplied.run_trial(InitScheme::SortingGame, 10, 0.5, 3);
  CHECK(trial_csv(a) == trial_csv(b));
}

TEST_CASE("experiment loads its datasets from specs") {
  auto cfg = small_config();
  const Experiment exp(cfg);
  CHECK(exp.train_set().size() + exp.val_set().size() == 120);
  CHECK(exp.val_set().class_counts() == std::vector<Index>{6, 6});
  CHECK(exp.game_seconds() >= 0.0);
}
