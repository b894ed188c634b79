#ifndef LDSORT_INITIALIZERS_HPP
#define LDSORT_INITIALIZERS_HPP

#include "ldsort/sorting_game.hpp"
#include "ldsort/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace ldsort {

enum class InitScheme { SortingGame, Orthogonal, XavierNormal, HeNormal };

namespace detail {

template <typename Scalar>
Matrix<Scalar> gaussian(Index rows, Index cols, double stddev, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw Error(ErrorKind::InvalidArgument, "matrix dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(normal(rng));
  }
  return m;
}

}  // namespace detail

/// Semi-orthogonal matrix: orthonormal rows when rows <= cols, orthonormal columns otherwise.
/// Built from the thin QR of a seeded Gaussian matrix, with Q's columns flipped so that R has a
/// non-negative diagonal.
template <typename Scalar>
Matrix<Scalar> orthogonal_init(Index rows, Index cols, std::uint64_t seed) {
  const bool wide = rows <= cols;
  const Index tall_rows = wide ? cols : rows;
  const Index tall_cols = wide ? rows : cols;
  const Eigen::MatrixXd a = detail::gaussian<double>(tall_rows, tall_cols, 1.0, seed);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall_rows, tall_cols);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(tall_cols).template triangularView<Eigen::Upper>();
  for (Index j = 0; j < tall_cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  if (wide) return q.transpose().cast<Scalar>();
  return q.cast<Scalar>();
}

/// i.i.d. N(0, 2 / (rows + cols)).
template <typename Scalar>
Matrix<Scalar> xavier_normal_init(Index rows, Index cols, std::uint64_t seed) {
  return detail::gaussian<Scalar>(rows, cols, std::sqrt(2.0 / static_cast<double>(rows + cols)), seed);
}

/// i.i.d. N(0, 2 / cols), cols being the fan-in.
template <typename Scalar>
Matrix<Scalar> he_normal_init(Index rows, Index cols, std::uint64_t seed) {
  return detail::gaussian<Scalar>(rows, cols, std::sqrt(2.0 / static_cast<double>(cols)), seed);
}

template <typename Scalar>
Matrix<Scalar> random_init(InitScheme scheme, Index rows, Index cols, std::uint64_t seed) {
  switch (scheme) {
    case InitScheme::Orthogonal: return orthogonal_init<Scalar>(rows, cols, seed);
    case InitScheme::XavierNormal: return xavier_normal_init<Scalar>(rows, cols, seed);
    case InitScheme::HeNormal: return he_normal_init<Scalar>(rows, cols, seed);
    case InitScheme::SortingGame: break;
  }
  throw Error(ErrorKind::InvalidArgument, "SortingGame is not a random scheme");
}

template <typename Scalar>
struct DenseInit {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
};

/// First-layer weights from sorting-game hyperplanes. Row j < h is w_j with bias -b_j, so the
/// pre-activation w_j . x - b_j vanishes on the hyperplane. The extra_multiplier * h rows after
/// them come from `extra_scheme` with zero bias.
template <typename Scalar, typename HScalar>
DenseInit<Scalar> sorting_game_layer(const SortingGameResult<HScalar>& game, int extra_multiplier, std::uint64_t seed,
                                     InitScheme extra_scheme = InitScheme::Orthogonal) {
  if (game.hyperplanes.empty()) throw Error(ErrorKind::Empty, "no hyperplanes to initialize from");
  if (extra_multiplier < 0) throw Error(ErrorKind::InvalidArgument, "extra_multiplier must be >= 0");
  const Index d = game.hyperplanes.front().w.size();
  const auto h = static_cast<Index>(game.hyperplanes.size());
  const Index m = h * (1 + extra_multiplier);

  DenseInit<Scalar> out{Matrix<Scalar>::Zero(m, d), Vector<Scalar>::Zero(m)};
  for (Index j = 0; j < h; ++j) {
    const auto& plane = game.hyperplanes[static_cast<std::size_t>(j)];
    if (plane.w.size() != d) throw Error(ErrorKind::DimensionMismatch, "hyperplanes disagree on dimension");
    out.weights.row(j) = plane.w.transpose().template cast<Scalar>();
    out.bias(j) = static_cast<Scalar>(-plane.b);
  }
  if (m > h) out.weights.bottomRows(m - h) = random_init<Scalar>(extra_scheme, m - h, d, seed);
  return out;
}

}  // namespace ldsort

#endif  // LDSORT_INITIALIZERS_HPP
