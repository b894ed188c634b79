#include "ldsort/data_io.hpp"

#include "ldsort/sampling.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace ldsort {

LabeledDataset::LabeledDataset(MatrixXd features, std::vector<int> labels, int n_classes, std::string name)
    : features_(std::move(features)), labels_(std::move(labels)), n_classes_(n_classes), name_(std::move(name)) {
  if (features_.rows() < 1) throw Error(ErrorKind::Empty, "dataset needs at least one point");
  if (features_.cols() < 1) throw Error(ErrorKind::InvalidArgument, "dataset needs at least one feature");
  if (static_cast<Index>(labels_.size()) != features_.rows()) {
    throw Error(ErrorKind::CountMismatch, "feature rows and labels disagree");
  }
  if (n_classes_ < 1) throw Error(ErrorKind::InvalidArgument, "n_classes must be positive");
  for (int y : labels_) {
    if (y < 0 || y >= n_classes_) throw Error(ErrorKind::BadLabel, "label " + std::to_string(y) + " out of range");
  }
  if (!features_.allFinite()) throw Error(ErrorKind::InvalidArgument, "features contain non-finite values");
}

std::vector<Index> LabeledDataset::class_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(n_classes_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const Index> rows, std::string name) const {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (Index r : rows) labels.push_back(labels_[static_cast<std::size_t>(r)]);
  MatrixXd features = features_(std::vector<Index>(rows.begin(), rows.end()), Eigen::all);
  return {std::move(features), std::move(labels), n_classes_, name.empty() ? name_ : std::move(name)};
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw Error(ErrorKind::TruncatedFile, path.string() + ": header cut short");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                  static_cast<char>(v)};
  out.write(bytes.data(), bytes.size());
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);

  if (read_be32(img, 0, images) != kImageMagic) throw Error(ErrorKind::BadMagic, images.string());
  if (read_be32(lab, 0, labels) != kLabelMagic) throw Error(ErrorKind::BadMagic, labels.string());

  const std::size_t n = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_labels = read_be32(lab, 4, labels);
  if (n != n_labels) {
    throw Error(ErrorKind::CountMismatch,
                std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
  }
  const std::size_t d = rows * cols;
  if (img.size() < 16 + n * d) throw Error(ErrorKind::TruncatedFile, images.string());
  if (lab.size() < 8 + n) throw Error(ErrorKind::TruncatedFile, labels.string());

  MatrixXd features(static_cast<Index>(n), static_cast<Index>(d));
  const unsigned char* pixels = img.data() + 16;
  for (std::size_t i = 0; i < n * d; ++i) features.data()[i] = static_cast<double>(pixels[i]) / 255.0;

  std::vector<int> y(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = lab[8 + i];
    max_label = std::max(max_label, y[i]);
  }
  return {std::move(features), std::move(y), max_label + 1, images.filename().string()};
}

void write_idx(const LabeledDataset& data, Index rows, Index cols, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  if (rows * cols != data.dim()) throw Error(ErrorKind::DimensionMismatch, "rows * cols != feature dimension");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error(ErrorKind::Io, "cannot create IDX output files");

  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  const auto& x = data.features();
  for (Index i = 0; i < x.size(); ++i) {
    const double v = std::clamp(std::round(x.data()[i] * 255.0), 0.0, 255.0);
    img.put(static_cast<char>(static_cast<unsigned char>(v)));
  }
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels()) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string{} : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), ptr};
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw Error(ErrorKind::Empty, path.string() + " has no rows");

  double scratch = 0.0;
  const bool header = std::any_of(rows.front().begin(), rows.front().end(),
                                  [&](const std::string& c) { return !parse_double(c, scratch); });
  const std::size_t width = rows.front().size();
  if (width < 2) throw Error(ErrorKind::RaggedRows, "need a label column and at least one feature");

  long label_idx = -1;
  if (header) {
    const auto& names = rows.front();
    const auto it = std::find(names.begin(), names.end(), label_column);
    if (it != names.end()) label_idx = it - names.begin();
  }
  if (label_idx < 0) {
    long parsed = 0;
    const auto [ptr, ec] = std::from_chars(label_column.data(), label_column.data() + label_column.size(), parsed);
    if (ec != std::errc() || ptr != label_column.data() + label_column.size()) {
      throw Error(ErrorKind::Config, "label column '" + label_column + "' not found");
    }
    label_idx = parsed < 0 ? static_cast<long>(width) + parsed : parsed;
    if (label_idx < 0 || label_idx >= static_cast<long>(width)) {
      throw Error(ErrorKind::Config, "label column index out of range");
    }
  }

  const std::size_t first = header ? 1 : 0;
  const auto n = static_cast<Index>(rows.size() - first);
  if (n < 1) throw Error(ErrorKind::Empty, path.string() + " has a header but no data");
  MatrixXd features(n, static_cast<Index>(width - 1));
  std::vector<int> labels(static_cast<std::size_t>(n));
  int max_label = 0;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const auto i = static_cast<Index>(r - first);
    if (cells.size() != width) {
      throw Error(ErrorKind::RaggedRows, "line " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                                             " cells, expected " + std::to_string(width));
    }
    Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        if (static_cast<long>(c) == label_idx) throw Error(ErrorKind::BadLabel, "line " + std::to_string(r + 1));
        throw Error(ErrorKind::NonNumericCell, "line " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                                   ": '" + cells[c] + "'");
      }
      if (static_cast<long>(c) == label_idx) {
        if (v < 0 || v != std::floor(v) || v > 1e9) {
          throw Error(ErrorKind::BadLabel, "line " + std::to_string(r + 1) + ": '" + cells[c] + "'");
        }
        labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
        max_label = std::max(max_label, static_cast<int>(v));
      } else {
        features(i, j++) = v;
      }
    }
  }
  return {std::move(features), std::move(labels), max_label + 1, path.filename().string()};
}

void write_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  for (Index j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "label\n";
  const auto& x = data.features();
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) out << format_double(x(i, j)) << ',';
    out << data.labels()[static_cast<std::size_t>(i)] << '\n';
  }
}

LabeledDataset synth_annulus(Index n_per_class, double inner_radius, double outer_radius, double noise_sigma,
                             std::uint64_t seed) {
  if (!(inner_radius > 0.0 && inner_radius < outer_radius)) {
    throw Error(ErrorKind::BadRadii, "need 0 < inner_radius < outer_radius");
  }
  if (n_per_class < 1) throw Error(ErrorKind::InvalidArgument, "n_per_class must be positive");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise_sigma must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  MatrixXd x(2 * n_per_class, 2);
  std::vector<int> y(static_cast<std::size_t>(2 * n_per_class));

  const double disk = 0.8 * inner_radius;
  for (Index i = 0; i < 2 * n_per_class; ++i) {
    const bool ring = i >= n_per_class;
    // Area-uniform radius: r^2 uniform between the squared bounds.
    const double lo2 = ring ? inner_radius * inner_radius : 0.0;
    const double hi2 = ring ? outer_radius * outer_radius : disk * disk;
    const double r = std::sqrt(lo2 + (hi2 - lo2) * unit(rng));
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    x(i, 0) = r * std::cos(theta);
    x(i, 1) = r * std::sin(theta);
    if (noise_sigma > 0.0) {
      x(i, 0) += noise_sigma * noise(rng);
      x(i, 1) += noise_sigma * noise(rng);
    }
    y[static_cast<std::size_t>(i)] = ring ? 1 : 0;
  }
  return {std::move(x), std::move(y), 2, "annulus"};
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "val_fraction must lie in (0, 1)");
  }
  std::mt19937_64 rng(seed);
  std::vector<Index> train_rows;
  std::vector<Index> val_rows;
  for (auto& [label, rows] : rows_by_label(data.labels())) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(rows.size())));
    if (n_val == 0 || n_val >= rows.size()) {
      throw Error(ErrorKind::TooSmall, "class " + std::to_string(label) + " cannot populate both sides of the split");
    }
    val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
  }
  std::shuffle(train_rows.begin(), train_rows.end(), rng);
  std::shuffle(val_rows.begin(), val_rows.end(), rng);
  return {data.subset(train_rows, data.name() + ":train"), data.subset(val_rows, data.name() + ":val")};
}

LabeledDataset subsample(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (fraction == 1.0) return data;
  const auto rows = stratified_sample_rows(data.labels(), fraction, seed);
  return data.subset(rows);
}

std::string dataset_hash(const LabeledDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::array<std::int64_t, 3> dims{data.size(), data.dim(), data.n_classes()};
  feed(dims.data(), sizeof(dims));
  feed(data.features().data(), static_cast<std::size_t>(data.features().size()) * sizeof(double));
  feed(data.labels().data(), data.labels().size() * sizeof(int));
  std::array<char, 17> hex{};
  std::snprintf(hex.data(), hex.size(), "%016llx", static_cast<unsigned long long>(h));
  return hex.data();
}

LabeledDataset load_dataset(const std::string& spec) {
  if (spec.rfind("idx:", 0) == 0) {
    const auto rest = spec.substr(4);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::Config, "idx spec needs '<images>,<labels>'");
    return load_idx(rest.substr(0, comma), rest.substr(comma + 1));
  }
  if (spec.rfind("csv:", 0) == 0) {
    const auto rest = spec.substr(4);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) return load_csv(rest, "-1");
    return load_csv(rest.substr(0, comma), rest.substr(comma + 1));
  }
  if (spec.rfind("annulus", 0) == 0) {
    Index n = 500;
    std::uint64_t seed = 7;
    if (spec.size() > 8 && spec[7] == ':') {
      std::istringstream ss(spec.substr(8));
      char sep = 0;
      ss >> n;
      if (ss >> sep) ss >> seed;
    }
    return synth_annulus(n, 1.0, 2.0, 0.05, seed);
  }
  std::string dir = spec;
  std::string prefix = "train";
  if (const auto at = spec.rfind('@'); at != std::string::npos) {
    dir = spec.substr(0, at);
    prefix = spec.substr(at + 1);
  }
  const std::filesystem::path base(dir);
  if (!std::filesystem::is_directory(base)) throw Error(ErrorKind::Io, "no such dataset: " + spec);
  return load_idx(base / (prefix + "-images-idx3-ubyte"), base / (prefix + "-labels-idx1-ubyte"))
      .with_name(base.filename().string() + "@" + prefix);
}

}  // namespace ldsort
