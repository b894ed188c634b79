#ifndef LDSORT_SAMPLING_HPP
#define LDSORT_SAMPLING_HPP

#include "ldsort/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

namespace ldsort {

/// Row indices grouped by label, each group in ascending row order.
inline std::map<int, std::vector<Index>> rows_by_label(std::span<const int> labels) {
  std::map<int, std::vector<Index>> groups;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    groups[labels[k]].push_back(static_cast<Index>(k));
  }
  return groups;
}

/// Draws ceil(fraction * count) rows per label without replacement. The result is sorted so
/// that a subsample keeps the original row order.
inline std::vector<Index> stratified_sample_rows(std::span<const int> labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "sample fraction must lie in (0, 1]");
  }
  std::vector<Index> picked;
  std::mt19937_64 rng(seed);
  for (auto& [label, rows] : rows_by_label(labels)) {
    const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows.size())));
    if (take < rows.size()) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(take);
    }
    picked.insert(picked.end(), rows.begin(), rows.end());
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace ldsort

#endif  // LDSORT_SAMPLING_HPP
