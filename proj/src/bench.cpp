#include "ldsort/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace ldsort {

double threshold_accuracy(std::span<const TrialRecord> records) {
  if (records.empty()) throw Error(ErrorKind::Empty, "threshold accuracy needs at least one record");
  double threshold = 1.0;
  for (const auto& r : records) {
    if (r.epochs.empty()) throw Error(ErrorKind::Empty, "record has no epochs");
    double best = 0.0;
    for (const auto& e : r.epochs) best = std::max(best, e.train_accuracy);
    threshold = std::min(threshold, best);
  }
  return threshold;
}

int epochs_to_threshold(const TrialRecord& record, double threshold) {
  if (record.epochs.empty()) throw Error(ErrorKind::Empty, "record has no epochs");
  for (std::size_t e = 0; e < record.epochs.size(); ++e) {
    if (record.epochs[e].train_accuracy >= threshold) return static_cast<int>(e + 1);
  }
  throw Error(ErrorKind::NeverReached, "train accuracy never reached the threshold");
}

double min_validation_error_percent(const TrialRecord& record) {
  if (record.epochs.empty()) throw Error(ErrorKind::Empty, "record has no epochs");
  double best = 0.0;
  for (const auto& e : record.epochs) best = std::max(best, e.val_accuracy);
  return 100.0 * (1.0 - best);
}

namespace {

std::pair<double, double> mean_and_var(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / (n - 1.0)};
}

}  // namespace

MeanDiff mean_difference(std::span<const double> lda, std::span<const double> rand) {
  if (lda.empty() || rand.empty()) throw Error(ErrorKind::Empty, "both schemes need trials");
  const auto [m_lda, v_lda] = mean_and_var(lda);
  const auto [m_rand, v_rand] = mean_and_var(rand);
  MeanDiff out;
  out.mean_lda = m_lda;
  out.mean_rand = m_rand;
  out.diff = m_rand - m_lda;
  out.se = std::sqrt(v_rand / static_cast<double>(rand.size()) + v_lda / static_cast<double>(lda.size()));
  out.significant = std::abs(out.diff) > 1.96 * out.se;
  return out;
}

CellSummary summarize_cell(Index batch_size, double learning_rate, std::span<const TrialRecord> lda,
                           std::span<const TrialRecord> rand) {
  std::vector<TrialRecord> pooled(lda.begin(), lda.end());
  pooled.insert(pooled.end(), rand.begin(), rand.end());
  CellSummary s;
  s.batch_size = batch_size;
  s.learning_rate = learning_rate;
  s.threshold_accuracy = threshold_accuracy(pooled);

  auto epochs = [&](std::span<const TrialRecord> rs) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(epochs_to_threshold(r, s.threshold_accuracy));
    return v;
  };
  auto errors = [](std::span<const TrialRecord> rs) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(min_validation_error_percent(r));
    return v;
  };
  const auto mu = mean_difference(epochs(lda), epochs(rand));
  const auto err = mean_difference(errors(lda), errors(rand));
  s.mu_lda = mu.mean_lda;
  s.mu_rand = mu.mean_rand;
  s.mu_diff = mu.diff;
  s.mu_diff_se = mu.se;
  s.significant = mu.significant;
  s.err_lda = err.mean_lda;
  s.err_rand = err.mean_rand;
  s.err_diff = err.diff;
  s.err_diff_se = err.se;
  s.err_significant = err.significant;
  return s;
}

Json to_json(const CellSummary& s) {
  return {{"batch_size", s.batch_size},   {"learning_rate", s.learning_rate},
          {"threshold_accuracy", s.threshold_accuracy},
          {"mu_lda", s.mu_lda},           {"mu_rand", s.mu_rand},
          {"mu_diff", s.mu_diff},         {"mu_diff_se", s.mu_diff_se},
          {"err_lda", s.err_lda},         {"err_rand", s.err_rand},
          {"err_diff", s.err_diff},       {"err_diff_se", s.err_diff_se},
          {"significant", s.significant}, {"err_significant", s.err_significant}};
}

void ExperimentConfig::validate() const {
  if (trials_per_cell < 1) throw Error(ErrorKind::Config, "trials_per_cell must be >= 1");
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be >= 1");
  if (batch_sizes.empty() || learning_rates.empty()) throw Error(ErrorKind::Config, "hyperparameter grid is empty");
  for (Index b : batch_sizes) {
    if (b < 1) throw Error(ErrorKind::Config, "batch sizes must be >= 1");
  }
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) throw Error(ErrorKind::Config, "learning rates must be > 0");
  }
  if (hidden.empty()) throw Error(ErrorKind::Config, "need at least one hidden layer");
  if (extra_multiplier < 0) throw Error(ErrorKind::Config, "extra_multiplier must be >= 0");
  if (jobs < 1) throw Error(ErrorKind::Config, "jobs must be >= 1");
  if (train.empty()) throw Error(ErrorKind::Config, "no training dataset given");
  game.validate();
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  try {
    ExperimentConfig c;
    c.train = j.at("train").get<std::string>();
    c.val = j.value("val", c.val);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.hidden = j.value("hidden", c.hidden);
    c.activation = activation_from_string(j.value("activation", std::string("sigmoid")));
    c.batch_sizes = j.value("batch_sizes", c.batch_sizes);
    c.learning_rates = j.value("learning_rates", c.learning_rates);
    c.trials_per_cell = j.value("trials_per_cell", c.trials_per_cell);
    c.epochs = j.value("epochs", c.epochs);
    c.hyperplanes = j.value("hyperplanes", c.hyperplanes);
    if (j.contains("game")) c.game = game_config_from_json(j.at("game"));
    c.extra_multiplier = j.value("extra_multiplier", c.extra_multiplier);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.baseline_seed_offset = j.value("baseline_seed_offset", c.baseline_seed_offset);
    c.lda_scheme = init_scheme_from_string(j.value("lda_scheme", std::string("sorting_game")));
    c.baseline = init_scheme_from_string(
        j.value("baseline", std::string(to_string(baseline_scheme(c.activation)))));
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
    c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
    const auto precision = j.value("precision", std::string("float32"));
    if (precision == "float32") {
      c.precision = Precision::Float32;
    } else if (precision == "float64") {
      c.precision = Precision::Float64;
    } else {
      throw Error(ErrorKind::Config, "precision must be float32 or float64");
    }
    c.results_dir = j.value("results_dir", std::string{});
    c.jobs = j.value("jobs", c.jobs);
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, e.what());
  }
}

Json to_json(const ExperimentConfig& c) {
  return {{"train", c.train},
          {"val", c.val},
          {"val_fraction", c.val_fraction},
          {"hidden", c.hidden},
          {"activation", to_string(c.activation)},
          {"batch_sizes", c.batch_sizes},
          {"learning_rates", c.learning_rates},
          {"trials_per_cell", c.trials_per_cell},
          {"epochs", c.epochs},
          {"hyperplanes", c.hyperplanes},
          {"game", to_json(c.game)},
          {"extra_multiplier", c.extra_multiplier},
          {"base_seed", c.base_seed},
          {"baseline_seed_offset", c.baseline_seed_offset},
          {"lda_scheme", to_string(c.lda_scheme)},
          {"baseline", to_string(c.baseline)},
          {"dropout_rate", c.dropout_rate},
          {"lr_decay_factor", c.lr_decay_factor},
          {"lr_decay_every", c.lr_decay_every},
          {"precision", c.precision == Precision::Float32 ? "float32" : "float64"},
          {"results_dir", c.results_dir.string()},
          {"jobs", c.jobs}};
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto train = load_dataset(cfg_.train);
  if (cfg_.val.empty()) {
    auto [tr, va] = split(train, cfg_.val_fraction, cfg_.base_seed);
    train_.emplace(std::move(tr));
    val_.emplace(std::move(va));
  } else {
    train_.emplace(std::move(train));
    val_.emplace(load_dataset(cfg_.val));
  }
  prepare();
}

Experiment::Experiment(ExperimentConfig cfg, LabeledDataset train, LabeledDataset val,
                       std::optional<HyperplaneFile> hyperplanes)
    : cfg_(std::move(cfg)), train_(std::move(train)), val_(std::move(val)) {
  if (hyperplanes) {
    planes_ = std::move(*hyperplanes);
    cfg_.hyperplanes = "<in-memory>";
  }
  prepare();
}

void Experiment::prepare() {
  if (train_->dim() != val_->dim()) throw Error(ErrorKind::DimensionMismatch, "train and validation widths differ");
  if (cfg_.hyperplanes.empty()) {
    const auto started = std::chrono::steady_clock::now();
    planes_.game = run_game<double>(train_->features(), train_->labels(), train_->n_classes(), cfg_.game);
    planes_.config = cfg_.game;
    planes_.dataset_hash = dataset_hash(*train_);
    game_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  } else if (cfg_.hyperplanes != "<in-memory>") {
    planes_ = read_hyperplanes(cfg_.hyperplanes);
  }
  if (planes_.game.hyperplanes.empty()) throw Error(ErrorKind::Empty, "the sorting game produced no hyperplanes");
  if (planes_.game.dim != train_->dim()) {
    throw Error(ErrorKind::DimensionMismatch, "hyperplane dimension " + std::to_string(planes_.game.dim) +
                                                  " != data dimension " + std::to_string(train_->dim()));
  }
  if (cfg_.precision == Precision::Float32) {
    train_f_ = train_->features_as<float>();
    val_f_ = val_->features_as<float>();
  }
}

template <typename Scalar>
TrialRecord Experiment::train_one(const Network<Scalar>& init, const TrainConfig& tc) const {
  Network<Scalar> net = init;
  if constexpr (std::is_same_v<Scalar, float>) {
    return train(net, DataRef<float>{train_f_, train_->labels()}, DataRef<float>{val_f_, val_->labels()}, tc);
  } else {
    return train(net, DataRef<double>{train_->features(), train_->labels()},
                 DataRef<double>{val_->features(), val_->labels()}, tc);
  }
}

TrialRecord Experiment::run_trial(InitScheme scheme, Index batch_size, double learning_rate, std::uint64_t seed,
                                  std::optional<std::vector<Index>> hidden, int extra_multiplier) const {
  const int extra = extra_multiplier >= 0 ? extra_multiplier : cfg_.extra_multiplier;
  Architecture arch;
  arch.inputs = train_->dim();
  arch.hidden = hidden.value_or(cfg_.hidden);
  arch.outputs = std::max(train_->n_classes(), val_->n_classes());
  arch.hidden_activation = cfg_.activation;
  const auto h = static_cast<Index>(planes_.game.hyperplanes.size());
  if (scheme != InitScheme::SortingGame && arch.hidden.front() == 0) arch.hidden.front() = h * (1 + extra);

  InitSpec init;
  init.scheme = scheme;
  init.hyperplanes = &planes_.game;
  init.extra_multiplier = extra;
  init.rng_seed = seed;
  init.baseline = cfg_.baseline == InitScheme::SortingGame ? baseline_scheme(cfg_.activation) : cfg_.baseline;

  TrainConfig tc;
  tc.batch_size = batch_size;
  tc.learning_rate = learning_rate;
  tc.epochs = cfg_.epochs;
  tc.dropout_rate = cfg_.dropout_rate;
  tc.lr_decay_factor = cfg_.lr_decay_factor;
  tc.lr_decay_every = cfg_.lr_decay_every;
  tc.shuffle_seed = seed;

  TrialRecord record = cfg_.precision == Precision::Float32 ? train_one(build_network<float>(arch, init), tc)
                                                             : train_one(build_network<double>(arch, init), tc);
  record.init_scheme = to_string(scheme);
  record.seed = seed;
  return record;
}

std::vector<TrialRecord> Experiment::run_many(const std::vector<std::function<TrialRecord()>>& jobs) const {
  std::vector<TrialRecord> out(jobs.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg_.jobs), jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i]();
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          out[i] = jobs[i]();
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

CellResult Experiment::run_cell(Index batch_size, double learning_rate) const {
  std::vector<std::function<TrialRecord()>> jobs;
  const auto t_count = static_cast<std::uint64_t>(cfg_.trials_per_cell);
  for (std::uint64_t t = 0; t < t_count; ++t) {
    jobs.emplace_back([=, this] { return run_trial(cfg_.lda_scheme, batch_size, learning_rate, cfg_.base_seed + t); });
  }
  for (std::uint64_t t = 0; t < t_count; ++t) {
    jobs.emplace_back([=, this] {
      return run_trial(cfg_.baseline, batch_size, learning_rate, cfg_.base_seed + cfg_.baseline_seed_offset + t);
    });
  }
  auto records = run_many(jobs);
  CellResult result;
  result.trials.lda.assign(std::make_move_iterator(records.begin()),
                           std::make_move_iterator(records.begin() + cfg_.trials_per_cell));
  result.trials.rand.assign(std::make_move_iterator(records.begin() + cfg_.trials_per_cell),
                            std::make_move_iterator(records.end()));
  result.summary = summarize_cell(batch_size, learning_rate, result.trials.lda, result.trials.rand);
  return result;
}

namespace {

std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), ptr};
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

std::filesystem::path cell_dir(const std::filesystem::path& root, Index batch_size, double learning_rate) {
  return root / ("cell_b" + std::to_string(batch_size) + "_lr" + shortest(learning_rate));
}

std::vector<CellSummary> Experiment::run_grid() const {
  std::vector<CellSummary> cells;
  Json trial_files = Json::array();
  for (double lr : cfg_.learning_rates) {
    for (Index b : cfg_.batch_sizes) {
      auto cell = run_cell(b, lr);
      if (!cfg_.results_dir.empty()) {
        const auto dir = cell_dir(cfg_.results_dir, b, lr);
        for (std::size_t t = 0; t < cell.trials.lda.size(); ++t) {
          write_trial_csv(dir / ("lda_" + std::to_string(t) + ".csv"), cell.trials.lda[t]);
          write_trial_csv(dir / ("rand_" + std::to_string(t) + ".csv"), cell.trials.rand[t]);
        }
      }
      cells.push_back(cell.summary);
    }
  }
  if (!cfg_.results_dir.empty()) {
    Json summary;
    summary["config"] = to_json(cfg_);
    summary["hyperplane_count"] = planes_.game.hyperplanes.size();
    summary["game_seconds"] = game_seconds_;
    summary["cells"] = Json::array();
    for (const auto& c : cells) summary["cells"].push_back(to_json(c));
    write_file_atomic(cfg_.results_dir / "summary.json", summary.dump(1) + "\n");
    write_file_atomic(cfg_.results_dir / "summary.csv", summary_csv(cells));
  }
  return cells;
}

SizeMatch Experiment::size_match(Index batch_size, double learning_rate, std::span<const Index> candidate_sizes,
                                 std::optional<InitScheme> candidate_scheme) const {
  if (!std::is_sorted(candidate_sizes.begin(), candidate_sizes.end())) {
    throw Error(ErrorKind::InvalidArgument, "candidate sizes must be ascending");
  }
  const InitScheme scheme = candidate_scheme.value_or(cfg_.baseline);
  const auto h = static_cast<Index>(planes_.game.hyperplanes.size());
  const auto t_count = static_cast<std::uint64_t>(cfg_.trials_per_cell);

  auto mean_best_val = [](const std::vector<TrialRecord>& rs) {
    double sum = 0.0;
    for (const auto& r : rs) sum += 1.0 - min_validation_error_percent(r) / 100.0;
    return sum / static_cast<double>(rs.size());
  };

  std::vector<Index> reference_hidden = cfg_.hidden;
  reference_hidden.front() = 0;
  std::vector<std::function<TrialRecord()>> jobs;
  for (std::uint64_t t = 0; t < t_count; ++t) {
    jobs.emplace_back([=, this] {
      return run_trial(InitScheme::SortingGame, batch_size, learning_rate, cfg_.base_seed + t, reference_hidden, 0);
    });
  }
  SizeMatch out;
  out.reference_accuracy = mean_best_val(run_many(jobs));

  for (Index width : candidate_sizes) {
    std::vector<Index> hidden = cfg_.hidden;
    hidden.front() = width;
    int extra = 0;
    std::uint64_t offset = cfg_.baseline_seed_offset;
    if (scheme == InitScheme::SortingGame) {
      if (width % h != 0) continue;
      extra = static_cast<int>(width / h - 1);
      hidden.front() = 0;
      offset = 0;
    }
    jobs.clear();
    for (std::uint64_t t = 0; t < t_count; ++t) {
      jobs.emplace_back([=, this] {
        return run_trial(scheme, batch_size, learning_rate, cfg_.base_seed + offset + t, hidden, extra);
      });
    }
    const double acc = mean_best_val(run_many(jobs));
    out.candidates.emplace_back(width, acc);
    if (acc >= out.reference_accuracy) {
      out.matched = width;
      break;
    }
  }
  return out;
}

std::string summary_table(std::span<const CellSummary> cells, bool validation_error) {
  std::vector<Index> batches;
  std::vector<double> rates;
  for (const auto& c : cells) {
    if (std::find(batches.begin(), batches.end(), c.batch_size) == batches.end()) batches.push_back(c.batch_size);
    if (std::find(rates.begin(), rates.end(), c.learning_rate) == rates.end()) rates.push_back(c.learning_rate);
  }
  std::ostringstream out;
  out << (validation_error ? "Err_rand - Err_lda (min validation error, %)\n" : "mu_rand - mu_lda (epochs to threshold)\n");
  out << std::left << std::setw(14) << "";
  for (Index b : batches) out << std::setw(24) << ("Batch Size " + std::to_string(b));
  out << '\n';
  for (double lr : rates) {
    out << std::setw(14) << ("eta = " + shortest(lr));
    for (Index b : batches) {
      const auto it = std::find_if(cells.begin(), cells.end(),
                                   [&](const CellSummary& c) { return c.batch_size == b && c.learning_rate == lr; });
      std::string cell = "-";
      if (it != cells.end()) {
        cell = validation_error
                   ? fixed(it->err_diff, 3) + "% ± " + fixed(it->err_diff_se, 3) + "%" + (it->err_significant ? "*" : "")
                   : fixed(it->mu_diff, 1) + " ± " + fixed(it->mu_diff_se, 1) + (it->significant ? "*" : "");
      }
      // setw counts bytes; the UTF-8 '±' takes two.
      out << std::setw(25) << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::string summary_csv(std::span<const CellSummary> cells) {
  std::vector<Index> batches;
  std::vector<double> rates;
  for (const auto& c : cells) {
    if (std::find(batches.begin(), batches.end(), c.batch_size) == batches.end()) batches.push_back(c.batch_size);
    if (std::find(rates.begin(), rates.end(), c.learning_rate) == rates.end()) rates.push_back(c.learning_rate);
  }
  std::string out = "metric,learning_rate";
  for (Index b : batches) out += ",batch_" + std::to_string(b);
  out += '\n';
  for (const bool err : {false, true}) {
    for (double lr : rates) {
      out += std::string(err ? "val_error_pct" : "epochs_to_threshold") + ',' + shortest(lr);
      for (Index b : batches) {
        const auto it = std::find_if(cells.begin(), cells.end(),
                                     [&](const CellSummary& c) { return c.batch_size == b && c.learning_rate == lr; });
        out += ',';
        if (it == cells.end()) continue;
        out += err ? fixed(it->err_diff, 3) + " ± " + fixed(it->err_diff_se, 3) + (it->err_significant ? "*" : "")
                   : fixed(it->mu_diff, 1) + " ± " + fixed(it->mu_diff_se, 1) + (it->significant ? "*" : "");
      }
      out += '\n';
    }
  }
  return out;
}

CellSummary summary_from_csvs(const std::filesystem::path& root, Index batch_size, double learning_rate,
                              int trials_per_cell) {
  const auto dir = cell_dir(root, batch_size, learning_rate);
  std::vector<TrialRecord> lda;
  std::vector<TrialRecord> rand;
  for (int t = 0; t < trials_per_cell; ++t) {
    lda.push_back(read_trial_csv(dir / ("lda_" + std::to_string(t) + ".csv")));
    rand.push_back(read_trial_csv(dir / ("rand_" + std::to_string(t) + ".csv")));
  }
  return summarize_cell(batch_size, learning_rate, lda, rand);
}

}  // namespace ldsort
