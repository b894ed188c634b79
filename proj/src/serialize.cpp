#include "ldsort/serialize.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ldsort {

const char* to_string(RemovalMode m) noexcept {
  return m == RemovalMode::RemoveSorted ? "sorted" : "literal";
}

RemovalMode removal_mode_from_string(const std::string& s) {
  if (s == "sorted") return RemovalMode::RemoveSorted;
  if (s == "literal") return RemovalMode::RemoveLiteral;
  throw Error(ErrorKind::Config, "removal mode must be 'sorted' or 'literal', got '" + s + "'");
}

Json to_json(const GameConfig& cfg) {
  return {{"ridge", cfg.ridge},
          {"removal", to_string(cfg.removal_mode)},
          {"blocks", cfg.n_blocks},
          {"sample_fraction", cfg.sample_fraction},
          {"seed", cfg.rng_seed},
          {"permute_blocks", cfg.permute_blocks}};
}

GameConfig game_config_from_json(const Json& j) {
  GameConfig cfg;
  cfg.ridge = j.value("ridge", cfg.ridge);
  cfg.removal_mode = removal_mode_from_string(j.value("removal", std::string(to_string(cfg.removal_mode))));
  cfg.n_blocks = j.value("blocks", cfg.n_blocks);
  cfg.sample_fraction = j.value("sample_fraction", cfg.sample_fraction);
  cfg.rng_seed = j.value("seed", cfg.rng_seed);
  cfg.permute_blocks = j.value("permute_blocks", cfg.permute_blocks);
  cfg.validate();
  return cfg;
}

Json to_json(const HyperplaneFile& file) {
  Json planes = Json::array();
  for (const auto& h : file.game.hyperplanes) {
    planes.push_back({{"class", h.class_id},
                      {"iteration", h.iteration},
                      {"w", std::vector<double>(h.w.data(), h.w.data() + h.w.size())},
                      {"b", h.b},
                      {"sorted_count", h.sorted_count}});
  }
  Json counts = Json::object();
  for (const auto& [c, n] : file.game.per_class_counts) counts[std::to_string(c)] = n;
  Json log = Json::array();
  for (const auto& r : file.game.removal_log) {
    log.push_back({{"class", r.class_id},
                   {"iteration", r.iteration},
                   {"points_before", r.points_before},
                   {"points_removed", r.points_removed}});
  }
  return {{"dim", file.game.dim},
          {"hyperplanes", std::move(planes)},
          {"per_class_counts", std::move(counts)},
          {"removal_log", std::move(log)},
          {"config", to_json(file.config)},
          {"dataset_hash", file.dataset_hash}};
}

HyperplaneFile hyperplane_file_from_json(const Json& j) {
  HyperplaneFile file;
  file.game.dim = j.at("dim").get<Index>();
  for (const auto& jh : j.at("hyperplanes")) {
    Hyperplane<double> h;
    const auto w = jh.at("w").get<std::vector<double>>();
    if (static_cast<Index>(w.size()) != file.game.dim) {
      throw Error(ErrorKind::DimensionMismatch, "hyperplane length disagrees with 'dim'");
    }
    h.w = Eigen::Map<const VectorXd>(w.data(), static_cast<Index>(w.size()));
    h.b = jh.at("b").get<double>();
    h.class_id = jh.at("class").get<int>();
    h.iteration = jh.at("iteration").get<int>();
    h.sorted_count = jh.at("sorted_count").get<Index>();
    ++file.game.per_class_counts[h.class_id];
    file.game.hyperplanes.push_back(std::move(h));
  }
  if (j.contains("removal_log")) {
    for (const auto& jr : j.at("removal_log")) {
      file.game.removal_log.push_back({jr.at("class").get<int>(), jr.at("iteration").get<int>(),
                                       jr.at("points_before").get<Index>(), jr.at("points_removed").get<Index>()});
    }
  }
  if (j.contains("per_class_counts")) {
    for (const auto& [k, v] : j.at("per_class_counts").items()) file.game.per_class_counts[std::stoi(k)] = v.get<int>();
  }
  if (j.contains("config")) file.config = game_config_from_json(j.at("config"));
  file.dataset_hash = j.value("dataset_hash", std::string{});
  return file;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot create " + tmp.string());
    out << contents;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

void write_hyperplanes(const std::filesystem::path& path, const HyperplaneFile& file) {
  write_file_atomic(path, to_json(file).dump(1) + "\n");
}

HyperplaneFile read_hyperplanes(const std::filesystem::path& path) {
  try {
    return hyperplane_file_from_json(read_json(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

namespace {

std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), ptr};
}

}  // namespace

std::string trial_csv(const TrialRecord& record) {
  std::string out = "epoch,train_acc,train_loss,val_acc,val_loss\n";
  for (std::size_t e = 0; e < record.epochs.size(); ++e) {
    const auto& m = record.epochs[e];
    out += std::to_string(e + 1) + ',' + shortest(m.train_accuracy) + ',' + shortest(m.train_loss) + ',' +
           shortest(m.val_accuracy) + ',' + shortest(m.val_loss) + '\n';
  }
  return out;
}

void write_trial_csv(const std::filesystem::path& path, const TrialRecord& record) {
  write_file_atomic(path, trial_csv(record));
}

TrialRecord read_trial_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_acc,train_loss,val_acc,val_loss") {
    throw Error(ErrorKind::Config, path.string() + ": unexpected trial CSV header");
  }
  TrialRecord record;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 5> v{};
    std::istringstream ss(line);
    std::string cell;
    for (double& x : v) {
      if (!std::getline(ss, cell, ',')) throw Error(ErrorKind::RaggedRows, path.string());
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (ec != std::errc()) throw Error(ErrorKind::NonNumericCell, path.string() + ": '" + cell + "'");
    }
    record.epochs.push_back({v[1], v[2], v[3], v[4]});
  }
  return record;
}

}  // namespace ldsort
