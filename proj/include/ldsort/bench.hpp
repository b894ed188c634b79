#ifndef LDSORT_BENCH_HPP
#define LDSORT_BENCH_HPP

// LDA-versus-random comparison experiments: epochs to a pooled threshold accuracy, minimum
// validation error, and the hidden width a random network needs to catch up.

#include "ldsort/data_io.hpp"
#include "ldsort/model.hpp"
#include "ldsort/serialize.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ldsort {

/// min over records of (max over epochs of train accuracy).
double threshold_accuracy(std::span<const TrialRecord> records);

/// 1-based first epoch whose train accuracy reaches `threshold`; NeverReached otherwise.
int epochs_to_threshold(const TrialRecord& record, double threshold);

/// 100 * (1 - max over epochs of validation accuracy).
double min_validation_error_percent(const TrialRecord& record);

struct MeanDiff {
  double mean_lda = 0.0;
  double mean_rand = 0.0;
  double diff = 0.0;  // mean_rand - mean_lda
  double se = 0.0;    // sqrt(s_rand^2 / t_rand + s_lda^2 / t_lda), sample variances
  bool significant = false;
};

/// Two-sample comparison; a side with a single trial contributes zero variance.
MeanDiff mean_difference(std::span<const double> lda, std::span<const double> rand);

struct CellSummary {
  Index batch_size = 0;
  double learning_rate = 0.0;
  double threshold_accuracy = 0.0;
  double mu_lda = 0.0;
  double mu_rand = 0.0;
  double mu_diff = 0.0;
  double mu_diff_se = 0.0;
  double err_lda = 0.0;
  double err_rand = 0.0;
  double err_diff = 0.0;
  double err_diff_se = 0.0;
  bool significant = false;
  bool err_significant = false;
};

/// Pools both schemes' records for the threshold, then compares epochs-to-threshold and minimum
/// validation error between schemes.
CellSummary summarize_cell(Index batch_size, double learning_rate, std::span<const TrialRecord> lda,
                           std::span<const TrialRecord> rand);

Json to_json(const CellSummary& s);

enum class Precision { Float32, Float64 };

struct ExperimentConfig {
  std::string train;                   // dataset spec (see load_dataset)
  std::string val;                     // empty: stratified split of `train`
  double val_fraction = 0.1;
  std::vector<Index> hidden{0};        // leading 0: width from the hyperplane count
  Activation activation = Activation::Sigmoid;
  std::vector<Index> batch_sizes{25, 100, 500};
  std::vector<double> learning_rates{0.001, 0.005, 0.01};
  int trials_per_cell = 5;
  int epochs = 50;
  std::string hyperplanes;             // empty: run the game on the training split
  GameConfig game;
  int extra_multiplier = 0;
  std::uint64_t base_seed = 0;
  std::uint64_t baseline_seed_offset = 1'000'000;
  InitScheme lda_scheme = InitScheme::SortingGame;
  InitScheme baseline = InitScheme::Orthogonal;
  double dropout_rate = 0.0;
  double lr_decay_factor = 1.0;
  int lr_decay_every = 0;
  Precision precision = Precision::Float32;
  std::filesystem::path results_dir;   // empty: nothing persisted
  int jobs = 1;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentConfig& cfg);

struct CellTrials {
  std::vector<TrialRecord> lda;
  std::vector<TrialRecord> rand;
};

struct CellResult {
  CellSummary summary;
  CellTrials trials;
};

struct SizeMatch {
  double reference_accuracy = 0.0;
  std::vector<std::pair<Index, double>> candidates;  // (width, mean best validation accuracy) tried
  std::optional<Index> matched;                      // nullopt: NotMatched
};

/// Owns the loaded data and hyperplanes for a run and trains the trials.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);
  /// In-memory data; the hyperplanes are computed on `train` when none are given.
  Experiment(ExperimentConfig cfg, LabeledDataset train, LabeledDataset val,
             std::optional<HyperplaneFile> hyperplanes = std::nullopt);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const LabeledDataset& train_set() const noexcept { return *train_; }
  const LabeledDataset& val_set() const noexcept { return *val_; }
  const HyperplaneFile& hyperplanes() const noexcept { return planes_; }
  double game_seconds() const noexcept { return game_seconds_; }

  /// One training run; `hidden` overrides the configured widths when given.
  TrialRecord run_trial(InitScheme scheme, Index batch_size, double learning_rate, std::uint64_t seed,
                        std::optional<std::vector<Index>> hidden = std::nullopt, int extra_multiplier = -1) const;

  /// Trials for both schemes; trial t uses base_seed + t (LDA) and base_seed + offset + t (baseline).
  CellResult run_cell(Index batch_size, double learning_rate) const;

  /// Cross product of batch sizes and learning rates, learning rate major. Persists per-trial CSVs,
  /// summary.json and summary.csv when results_dir is set.
  std::vector<CellSummary> run_grid() const;

  /// Smallest candidate width whose `candidate_scheme` networks reach the reference (LDA, extra 0)
  /// mean best validation accuracy.
  SizeMatch size_match(Index batch_size, double learning_rate, std::span<const Index> candidate_sizes,
                       std::optional<InitScheme> candidate_scheme = std::nullopt) const;

 private:
  void prepare();
  template <typename Scalar>
  TrialRecord train_one(const Network<Scalar>& init, const TrainConfig& tc) const;
  std::vector<TrialRecord> run_many(const std::vector<std::function<TrialRecord()>>& jobs) const;

  ExperimentConfig cfg_;
  std::optional<LabeledDataset> train_;
  std::optional<LabeledDataset> val_;
  HyperplaneFile planes_;
  double game_seconds_ = 0.0;
  Matrix<float> train_f_, val_f_;
};

/// Directory for a cell's per-trial CSVs inside `root`.
std::filesystem::path cell_dir(const std::filesystem::path& root, Index batch_size, double learning_rate);

/// Rows: learning rates; columns: batch sizes; cells "diff ± SE" with '*' when significant.
std::string summary_table(std::span<const CellSummary> cells, bool validation_error);
std::string summary_csv(std::span<const CellSummary> cells);

/// Recomputes a cell summary from the per-trial CSVs persisted by run_grid.
CellSummary summary_from_csvs(const std::filesystem::path& root, Index batch_size, double learning_rate,
                              int trials_per_cell);

}  // namespace ldsort

#endif  // LDSORT_BENCH_HPP
