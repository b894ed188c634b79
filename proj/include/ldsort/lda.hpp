#ifndef LDSORT_LDA_HPP
#define LDSORT_LDA_HPP

// Two-class Fisher linear discriminants.

#include "ldsort/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace ldsort {

using Flags = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Points with a one-vs-rest flag per row (true marks the target class).
template <typename Scalar>
struct BinaryView {
  Eigen::Ref<const Matrix<Scalar>> points;
  Eigen::Ref<const Flags> flags;
};

template <typename Scalar>
struct ScatterSummary {
  Vector<Scalar> mean_pos;
  Vector<Scalar> mean_neg;
  Matrix<Scalar> within_scatter;
  Index count_pos = 0;
  Index count_neg = 0;
};

namespace detail {

inline constexpr Index kScatterChunk = 1024;

template <typename Scalar>
void check_view(const BinaryView<Scalar>& view) {
  if (view.points.rows() != view.flags.size()) {
    throw Error(ErrorKind::DimensionMismatch, "points and flags disagree on N");
  }
  if (view.points.cols() < 1) {
    throw Error(ErrorKind::InvalidArgument, "points must have at least one feature");
  }
}

// Adds sum_k (x_k - mean)(x_k - mean)^T over the listed rows into the lower triangle of `lower`.
template <typename Scalar>
void accumulate_scatter(const Eigen::Ref<const Matrix<Scalar>>& points, const std::vector<Index>& rows,
                        const Vector<Scalar>& mean, Matrix<Scalar>& lower) {
  const Index d = points.cols();
  Matrix<Scalar> chunk;
  for (std::size_t start = 0; start < rows.size(); start += kScatterChunk) {
    const auto len = static_cast<Index>(std::min<std::size_t>(kScatterChunk, rows.size() - start));
    chunk.resize(len, d);
    for (Index r = 0; r < len; ++r) {
      chunk.row(r) = points.row(rows[start + static_cast<std::size_t>(r)]) - mean.transpose();
    }
    lower.template selfadjointView<Eigen::Lower>().rankUpdate(chunk.transpose());
  }
}

}  // namespace detail

/// Class means and the pooled within-class scatter
/// S_W = sum_c sum_{k in c} (x_k - mu_c)(x_k - mu_c)^T.
template <typename Scalar>
ScatterSummary<Scalar> scatter_summary(const BinaryView<Scalar>& view) {
  detail::check_view(view);
  const Index d = view.points.cols();

  std::vector<Index> pos;
  std::vector<Index> neg;
  for (Index k = 0; k < view.flags.size(); ++k) {
    (view.flags(k) ? pos : neg).push_back(k);
  }
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorKind::EmptyClass, "both classes need at least one point");
  }

  ScatterSummary<Scalar> s;
  s.count_pos = static_cast<Index>(pos.size());
  s.count_neg = static_cast<Index>(neg.size());
  s.mean_pos = Vector<Scalar>::Zero(d);
  s.mean_neg = Vector<Scalar>::Zero(d);
  for (Index k : pos) s.mean_pos += view.points.row(k).transpose();
  for (Index k : neg) s.mean_neg += view.points.row(k).transpose();
  s.mean_pos /= static_cast<Scalar>(s.count_pos);
  s.mean_neg /= static_cast<Scalar>(s.count_neg);

  Matrix<Scalar> lower = Matrix<Scalar>::Zero(d, d);
  detail::accumulate_scatter<Scalar>(view.points, pos, s.mean_pos, lower);
  detail::accumulate_scatter<Scalar>(view.points, neg, s.mean_neg, lower);
  s.within_scatter = lower.template selfadjointView<Eigen::Lower>();
  return s;
}

/// Unit Fisher direction from a precomputed summary, oriented so that w . (mu_pos - mu_neg) >= 0.
template <typename Scalar>
Vector<Scalar> fisher_direction(const ScatterSummary<Scalar>& s, Scalar ridge) {
  if (!(ridge >= Scalar(0))) {
    throw Error(ErrorKind::InvalidArgument, "ridge must be non-negative");
  }
  const Index d = s.within_scatter.rows();
  const Vector<Scalar> delta = s.mean_pos - s.mean_neg;
  if ((delta.array() == Scalar(0)).all()) {
    throw Error(ErrorKind::DegenerateDiscriminant, "class means coincide");
  }

  const Scalar trace = s.within_scatter.trace();
  const Scalar lambda = trace > Scalar(0) ? ridge * trace / static_cast<Scalar>(d) : ridge;
  Matrix<Scalar> a = s.within_scatter;
  a.diagonal().array() += lambda;

  Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::DegenerateDiscriminant, "regularized within-class scatter is not positive definite");
  }
  Vector<Scalar> w = llt.solve(delta);
  const Scalar norm = w.norm();
  if (!std::isfinite(norm) || norm == Scalar(0)) {
    throw Error(ErrorKind::DegenerateDiscriminant, "discriminant solve produced no direction");
  }
  w /= norm;
  if (w.dot(delta) < Scalar(0)) w = -w;
  return w;
}

/// w = normalize((S_W + lambda I)^{-1} (mu_pos - mu_neg)) with lambda = ridge * trace(S_W) / d
/// (lambda = ridge when the trace vanishes).
template <typename Scalar>
Vector<Scalar> fisher_direction(const BinaryView<Scalar>& view, Scalar ridge) {
  return fisher_direction(scatter_summary(view), ridge);
}

/// Contiguous partition of [0, d) into n_blocks pieces; the first d % n_blocks pieces get one extra index.
inline std::vector<std::vector<Index>> partition_features(Index d, Index n_blocks,
                                                          const std::optional<std::uint64_t>& permute_seed = {}) {
  if (n_blocks < 1 || n_blocks > d) {
    throw Error(ErrorKind::InvalidArgument, "n_blocks must lie in [1, d]");
  }
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  if (permute_seed) {
    std::mt19937_64 rng(*permute_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<Index>> blocks;
  const Index base = d / n_blocks;
  const Index extra = d % n_blocks;
  std::size_t cursor = 0;
  for (Index b = 0; b < n_blocks; ++b) {
    const auto len = static_cast<std::size_t>(base + (b < extra ? 1 : 0));
    std::vector<Index> block(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                             order.begin() + static_cast<std::ptrdiff_t>(cursor + len));
    std::sort(block.begin(), block.end());
    blocks.push_back(std::move(block));
    cursor += len;
  }
  return blocks;
}

/// One Fisher direction per feature block, embedded back into R^d. Blocks whose discriminant
/// degenerates are skipped; EmptyClass propagates.
template <typename Scalar>
std::vector<Vector<Scalar>> blockwise_fisher_directions(const BinaryView<Scalar>& view, Index n_blocks, Scalar ridge,
                                                        const std::optional<std::uint64_t>& permute_seed = {}) {
  detail::check_view(view);
  const Index d = view.points.cols();
  const auto blocks = partition_features(d, n_blocks, permute_seed);
  std::vector<Vector<Scalar>> out;
  if (blocks.size() == 1) {
    try {
      out.push_back(fisher_direction(view, ridge));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDiscriminant) throw;
    }
    return out;
  }

  for (const auto& block : blocks) {
    const Matrix<Scalar> sub = view.points(Eigen::all, block);
    Vector<Scalar> local;
    try {
      local = fisher_direction(BinaryView<Scalar>{sub, view.flags}, ridge);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DegenerateDiscriminant) continue;
      throw;
    }
    Vector<Scalar> w = Vector<Scalar>::Zero(d);
    w(block) = local;
    w.normalize();
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace ldsort

#endif  // LDSORT_LDA_HPP
