#ifndef LDSORT_DATA_IO_HPP
#define LDSORT_DATA_IO_HPP

#include "ldsort/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ldsort {

/// N labelled points in R^d. Validated on construction and immutable afterwards.
class LabeledDataset {
 public:
  LabeledDataset(MatrixXd features, std::vector<int> labels, int n_classes, std::string name = {});

  const MatrixXd& features() const noexcept { return features_; }
  std::span<const int> labels() const noexcept { return labels_; }
  int n_classes() const noexcept { return n_classes_; }
  const std::string& name() const noexcept { return name_; }
  Index size() const noexcept { return features_.rows(); }
  Index dim() const noexcept { return features_.cols(); }

  std::vector<Index> class_counts() const;
  LabeledDataset subset(std::span<const Index> rows, std::string name = {}) const;
  LabeledDataset with_name(std::string name) && {
    name_ = std::move(name);
    return std::move(*this);
  }

  /// Features converted to another scalar type (e.g. float for training).
  template <typename Scalar>
  Matrix<Scalar> features_as() const {
    return features_.cast<Scalar>();
  }

 private:
  MatrixXd features_;
  std::vector<int> labels_;
  int n_classes_;
  std::string name_;
};

/// Reads an IDX image file (magic 0x00000803, u8) and label file (0x00000801, u8).
/// Pixels are scaled to [0, 1] and images flattened row-major.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes u8 IDX files; features are mapped back with round(255 * x) clamped to [0, 255].
void write_idx(const LabeledDataset& data, Index rows, Index cols, const std::filesystem::path& images,
               const std::filesystem::path& labels);

/// `label_column` is a header name or a zero-based column index (negative counts from the end).
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes features then a trailing "label" column, with a header row. Values round-trip exactly.
void write_csv(const LabeledDataset& data, const std::filesystem::path& path);

/// Class 0 uniform in the disk of radius 0.8 * inner, class 1 uniform on the annulus
/// [inner, outer], plus isotropic Gaussian noise.
LabeledDataset synth_annulus(Index n_per_class, double inner_radius = 1.0, double outer_radius = 2.0,
                             double noise_sigma = 0.05, std::uint64_t seed = 0);

/// Stratified shuffled split into (train, validation).
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double val_fraction, std::uint64_t seed);

/// Stratified draw without replacement of ceil(fraction * count) rows per class.
LabeledDataset subsample(const LabeledDataset& data, double fraction, std::uint64_t seed);

/// FNV-1a over dimensions, feature bytes and labels, as 16 hex digits.
std::string dataset_hash(const LabeledDataset& data);

/// Parses "idx:<images>,<labels>", "csv:<path>[,<label column>]", or a directory holding the
/// standard train-images-idx3-ubyte / train-labels-idx1-ubyte pair.
LabeledDataset load_dataset(const std::string& spec);

}  // namespace ldsort

#endif  // LDSORT_DATA_IO_HPP
