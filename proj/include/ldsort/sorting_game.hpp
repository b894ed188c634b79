#ifndef LDSORT_SORTING_GAME_HPP
#define LDSORT_SORTING_GAME_HPP

// Linear discriminant sorting: per class, repeatedly cut the remaining points with a Fisher
// discriminant, keep the count-maximizing threshold as a hyperplane and drop the points it settles.

#include "ldsort/lda.hpp"
#include "ldsort/sampling.hpp"
#include "ldsort/types.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace ldsort {

enum class RemovalMode {
  /// Drop the points counted by the maximized objective.
  RemoveSorted,
  /// Drop the complement: (not target and z <= b) or (target and z > b).
  RemoveLiteral,
};

struct GameConfig {
  double ridge = 1e-4;
  RemovalMode removal_mode = RemovalMode::RemoveSorted;
  Index n_blocks = 1;
  double sample_fraction = 1.0;
  std::uint64_t rng_seed = 0;
  // Shuffle feature indices (seeded by rng_seed) before the blockwise partition.
  bool permute_blocks = false;

  void validate() const {
    if (!(ridge >= 0.0)) throw Error(ErrorKind::Config, "ridge must be >= 0");
    if (n_blocks < 1) throw Error(ErrorKind::Config, "n_blocks must be >= 1");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
      throw Error(ErrorKind::Config, "sample_fraction must lie in (0, 1]");
    }
  }
};

/// A stored cut. Points of class_id satisfy w . x <= b on the sorted side.
template <typename Scalar>
struct Hyperplane {
  Vector<Scalar> w;
  Scalar b = 0;
  int class_id = 0;
  int iteration = 0;
  Index sorted_count = 0;
};

struct RemovalRecord {
  int class_id = 0;
  int iteration = 0;
  Index points_before = 0;
  Index points_removed = 0;
};

template <typename Scalar>
struct SortingGameResult {
  Index dim = 0;
  std::vector<Hyperplane<Scalar>> hyperplanes;
  std::map<int, int> per_class_counts;
  std::vector<RemovalRecord> removal_log;
};

template <typename Scalar>
struct ClassGame {
  std::vector<Hyperplane<Scalar>> hyperplanes;
  std::vector<RemovalRecord> removal_log;
  /// Rows of the input that were never removed, ascending.
  std::vector<Index> remaining_rows;
};

struct BiasChoice {
  double b = 0.0;
  Index sorted_count = 0;
};

/// z_k = w . x_k, accumulated left to right per row.
template <typename Scalar>
Vector<Scalar> project(const Eigen::Ref<const Matrix<Scalar>>& points, const Eigen::Ref<const Vector<Scalar>>& w) {
  if (points.cols() != w.size()) {
    throw Error(ErrorKind::DimensionMismatch, "projection direction does not match point dimension");
  }
  Vector<Scalar> z(points.rows());
  for (Index k = 0; k < points.rows(); ++k) {
    Scalar acc = 0;
    const Scalar* row = points.row(k).data();
    for (Index j = 0; j < points.cols(); ++j) acc += row[j] * w(j);
    z(k) = acc;
  }
  return z;
}

/// Threshold maximizing #{flag and z <= b} + #{!flag and z > b}. Candidates are min(z) - 1,
/// the midpoints between consecutive distinct values, and max(z); ties go to the smallest b.
template <typename Scalar>
BiasChoice best_bias(const Eigen::Ref<const Vector<Scalar>>& z, const Eigen::Ref<const Flags>& flags) {
  const Index n = z.size();
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "best_bias needs at least one value");
  if (flags.size() != n) throw Error(ErrorKind::DimensionMismatch, "z and flags disagree on N");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return z(a) < z(b); });

  // Everything above the threshold: only the negatives count.
  Index count = flags.size() - flags.count();
  BiasChoice best{static_cast<double>(z(order.front())) - 1.0, count};

  std::size_t i = 0;
  while (i < order.size()) {
    const Scalar value = z(order[i]);
    while (i < order.size() && z(order[i]) == value) {
      count += flags(order[i]) ? 1 : -1;
      ++i;
    }
    double threshold = static_cast<double>(value);
    if (i < order.size()) {
      const double next = static_cast<double>(z(order[i]));
      const double mid = threshold + (next - threshold) / 2.0;
      if (mid < next) threshold = mid;
    }
    if (count > best.sorted_count) best = {threshold, count};
  }
  return best;
}

namespace detail {

inline Flags target_flags(std::span<const int> labels, int class_id) {
  Flags flags(static_cast<Index>(labels.size()));
  for (std::size_t k = 0; k < labels.size(); ++k) flags(static_cast<Index>(k)) = labels[k] == class_id;
  return flags;
}

template <typename Scalar>
std::vector<Vector<Scalar>> game_directions(const Matrix<Scalar>& points, std::span<const int> labels,
                                            const Flags& flags, int class_id, int iteration, const GameConfig& cfg) {
  const auto ridge = static_cast<Scalar>(cfg.ridge);
  const std::optional<std::uint64_t> permute =
      cfg.permute_blocks ? std::optional<std::uint64_t>(cfg.rng_seed) : std::nullopt;

  if (cfg.sample_fraction < 1.0) {
    const std::uint64_t seed =
        mix_seed(cfg.rng_seed, (static_cast<std::uint64_t>(class_id) << 32) | static_cast<std::uint32_t>(iteration));
    const auto rows = stratified_sample_rows(labels, cfg.sample_fraction, seed);
    const Matrix<Scalar> sub = points(rows, Eigen::all);
    const Flags sub_flags = flags(rows);
    return blockwise_fisher_directions<Scalar>(BinaryView<Scalar>{sub, sub_flags}, cfg.n_blocks, ridge, permute);
  }
  return blockwise_fisher_directions<Scalar>(BinaryView<Scalar>{points, flags}, cfg.n_blocks, ridge, permute);
}

}  // namespace detail

/// One "class versus rest" game. The loop stops when either side holds fewer than d points, the
/// discriminant degenerates, or an iteration removes nothing (that iteration is not recorded).
template <typename Scalar>
ClassGame<Scalar> run_class(const Eigen::Ref<const Matrix<Scalar>>& points, std::span<const int> labels, int class_id,
                            const GameConfig& cfg) {
  cfg.validate();
  if (points.rows() != static_cast<Index>(labels.size())) {
    throw Error(ErrorKind::DimensionMismatch, "points and labels disagree on N");
  }
  if (points.rows() == 0) throw Error(ErrorKind::Empty, "dataset is empty");
  if (std::find(labels.begin(), labels.end(), class_id) == labels.end()) {
    throw Error(ErrorKind::UnknownClass, "class " + std::to_string(class_id) + " not present");
  }
  if (cfg.n_blocks > points.cols()) throw Error(ErrorKind::Config, "n_blocks exceeds the feature dimension");

  const Index d = points.cols();
  ClassGame<Scalar> game;
  Matrix<Scalar> current = points;
  std::vector<int> current_labels(labels.begin(), labels.end());
  game.remaining_rows.resize(labels.size());
  std::iota(game.remaining_rows.begin(), game.remaining_rows.end(), Index{0});

  for (int iteration = 0;; ++iteration) {
    const Flags flags = detail::target_flags(current_labels, class_id);
    const Index n_pos = flags.count();
    const Index n_neg = flags.size() - n_pos;
    if (n_pos < d || n_neg < d) break;

    const auto directions = detail::game_directions<Scalar>(current, current_labels, flags, class_id, iteration, cfg);
    if (directions.empty()) break;

    Flags remove = Flags::Constant(flags.size(), false);
    std::vector<Hyperplane<Scalar>> cuts;
    for (const auto& direction : directions) {
      // Put the target class on the low side so the count's z <= b branch belongs to it.
      Hyperplane<Scalar> h;
      h.w = -direction;
      const Vector<Scalar> z = project<Scalar>(current, h.w);
      const BiasChoice choice = best_bias<Scalar>(z, flags);
      h.b = static_cast<Scalar>(choice.b);
      h.class_id = class_id;
      h.iteration = iteration;
      h.sorted_count = choice.sorted_count;

      const auto low = (z.array() <= h.b);
      if (cfg.removal_mode == RemovalMode::RemoveSorted) {
        remove = remove || (flags && low) || (!flags && !low);
      } else {
        remove = remove || (!flags && low) || (flags && !low);
      }
      cuts.push_back(std::move(h));
    }

    const Index removed = remove.count();
    if (removed == 0) break;

    game.removal_log.push_back({class_id, iteration, flags.size(), removed});
    for (auto& h : cuts) game.hyperplanes.push_back(std::move(h));

    Index keep = 0;
    for (Index k = 0; k < flags.size(); ++k) {
      if (remove(k)) continue;
      if (keep != k) {
        current.row(keep) = current.row(k);
        current_labels[static_cast<std::size_t>(keep)] = current_labels[static_cast<std::size_t>(k)];
        game.remaining_rows[static_cast<std::size_t>(keep)] = game.remaining_rows[static_cast<std::size_t>(k)];
      }
      ++keep;
    }
    current.conservativeResize(keep, Eigen::NoChange);
    current_labels.resize(static_cast<std::size_t>(keep));
    game.remaining_rows.resize(static_cast<std::size_t>(keep));
  }
  return game;
}

/// Runs every class's game on the full data, classes in ascending order.
template <typename Scalar>
SortingGameResult<Scalar> run_game(const Eigen::Ref<const Matrix<Scalar>>& points, std::span<const int> labels,
                                   int n_classes, const GameConfig& cfg) {
  if (n_classes < 2) throw Error(ErrorKind::InvalidArgument, "the sorting game needs at least two classes");
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw Error(ErrorKind::BadLabel, "label outside [0, n_classes)");
  }
  SortingGameResult<Scalar> result;
  result.dim = points.cols();
  for (int c = 0; c < n_classes; ++c) {
    auto game = run_class<Scalar>(points, labels, c, cfg);
    result.per_class_counts[c] = static_cast<int>(game.hyperplanes.size());
    for (auto& h : game.hyperplanes) result.hyperplanes.push_back(std::move(h));
    for (const auto& r : game.removal_log) result.removal_log.push_back(r);
  }
  return result;
}

}  // namespace ldsort

#endif  // LDSORT_SORTING_GAME_HPP
