#include "ldsort/cli.hpp"

#include "ldsort/bench.hpp"
#include "ldsort/data_io.hpp"
#include "ldsort/model.hpp"
#include "ldsort/serialize.hpp"
#include "ldsort/sorting_game.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <numeric>

namespace ldsort::cli {

std::filesystem::path results_root() {
  if (const char* env = std::getenv("LDA_SEED_RESULTS_DIR"); env != nullptr && *env != '\0') return env;
  return "results";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int parse_args(CLI::App& app, const std::string& name, const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err, bool& done) {
  std::vector<const char*> argv{name.c_str()};
  for (const auto& a : args) argv.push_back(a.c_str());
  done = false;
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    done = true;
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kLoadError;
  }
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::DimensionMismatch: return kDimensionMismatch;
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::NeverReached: return kRunFailed;
    default: return kLoadError;
  }
}

/// Accepts either a config file or a run manifest (whose "config" member is used).
Json load_config(const std::filesystem::path& path) {
  Json j = read_json(path);
  if (j.is_object() && j.value("tool", std::string{}) == "ldsort" && j.contains("config")) return j.at("config");
  return j;
}

Json manifest_base(const std::string& command, const Json& config) {
  return {{"tool", "ldsort"},
          {"version", kToolVersion},
          {"command", command},
          {"config", config},
          {"dataset_hashes", Json::object()},
          {"seeds", Json::object()},
          {"outputs", Json::array()},
          {"timings", Json::object()}};
}

std::filesystem::path manifest_path_for(const std::filesystem::path& out) {
  auto p = out;
  p.replace_extension(".manifest.json");
  return p;
}

}  // namespace

int cmd_sort(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run the linear discriminant sorting game and write the hyperplanes", "sort"};
  std::string data;
  std::string out_path;
  std::string removal = "sorted";
  GameConfig cfg;
  app.add_option("--data", data, "Dataset: IDX directory[@prefix], idx:<images>,<labels>, csv:<path>[,<label>]")
      ->required();
  app.add_option("--out", out_path, "Hyperplane JSON output")->required();
  app.add_option("--ridge", cfg.ridge, "Ridge factor relative to trace(S_W)/d")->capture_default_str();
  app.add_option("--blocks", cfg.n_blocks, "Number of contiguous feature blocks")->capture_default_str();
  app.add_option("--sample", cfg.sample_fraction, "Fraction of points used for direction estimates")
      ->capture_default_str();
  app.add_option("--removal", removal, "Removal rule")->check(CLI::IsMember({"sorted", "literal"}))->capture_default_str();
  app.add_option("--seed", cfg.rng_seed, "Seed for subsampling and block permutation")->capture_default_str();
  app.add_flag("--permute-blocks", cfg.permute_blocks, "Shuffle features before partitioning into blocks");
  bool done = false;
  if (const int code = parse_args(app, "sort", args, out, err, done); done) return code;

  try {
    cfg.removal_mode = removal_mode_from_string(removal);
    cfg.validate();
  } catch (const Error& e) {
    err << "sort: " << e.what() << '\n';
    return kLoadError;
  }

  const auto load_start = Clock::now();
  std::optional<LabeledDataset> dataset;
  try {
    dataset.emplace(load_dataset(data));
  } catch (const std::exception& e) {
    err << "sort: cannot load '" << data << "': " << e.what() << '\n';
    return kLoadError;
  }
  const double load_seconds = seconds_since(load_start);

  HyperplaneFile file;
  file.config = cfg;
  file.dataset_hash = dataset_hash(*dataset);
  const auto game_start = Clock::now();
  try {
    file.game = run_game<double>(dataset->features(), dataset->labels(), dataset->n_classes(), cfg);
  } catch (const Error& e) {
    err << "sort: " << e.what() << '\n';
    return exit_code_for(e);
  }
  const double game_seconds = seconds_since(game_start);

  for (const auto& [c, n] : file.game.per_class_counts) out << "class " << c << ": " << n << " hyperplanes\n";
  out << "total hyperplanes: " << file.game.hyperplanes.size() << '\n';
  out << "sorting game seconds: " << std::fixed << std::setprecision(2) << game_seconds << '\n';
  if (file.game.hyperplanes.empty()) {
    err << "sort: the game found no hyperplanes (every class has fewer than d points on one side)\n";
    return kDegenerateGame;
  }

  try {
    write_hyperplanes(out_path, file);
    Json manifest = manifest_base("sort", {{"data", data}, {"out", out_path}, {"game", to_json(cfg)}});
    manifest["dataset_hashes"][data] = file.dataset_hash;
    manifest["seeds"]["game"] = cfg.rng_seed;
    manifest["outputs"].push_back(out_path);
    manifest["timings"] = {{"load_seconds", load_seconds}, {"game_seconds", game_seconds}};
    Json counts = Json::object();
    for (const auto& [c, n] : file.game.per_class_counts) counts[std::to_string(c)] = n;
    manifest["results"] = {{"total_hyperplanes", file.game.hyperplanes.size()},
                           {"per_class_counts", counts},
                           {"points", dataset->size()},
                           {"dim", dataset->dim()}};
    write_file_atomic(manifest_path_for(out_path), manifest.dump(1) + "\n");
  } catch (const std::exception& e) {
    err << "sort: " << e.what() << '\n';
    return kLoadError;
  }
  return kOk;
}

namespace {

struct TrainRun {
  std::string train;
  std::string val;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;
  Architecture arch;
  InitScheme scheme = InitScheme::Orthogonal;
  std::string hyperplanes;
  GameConfig game;
  int extra_multiplier = 0;
  std::optional<InitScheme> baseline;
  TrainConfig train_cfg;
  std::uint64_t seed = 0;
  Precision precision = Precision::Float64;
  std::filesystem::path output_dir;
};

TrainRun train_run_from_json(const Json& j) {
  try {
    TrainRun r;
    r.train = j.at("train").get<std::string>();
    r.val = j.value("val", std::string{});
    r.val_fraction = j.value("val_fraction", r.val_fraction);
    r.split_seed = j.value("split_seed", r.split_seed);
    r.arch.hidden = j.value("hidden", std::vector<Index>{0});
    r.arch.hidden_activation = activation_from_string(j.value("activation", std::string("sigmoid")));
    const Json init = j.value("init", Json::object());
    r.scheme = init_scheme_from_string(init.value("scheme", std::string("orthogonal")));
    r.hyperplanes = init.value("hyperplanes", std::string{});
    r.extra_multiplier = init.value("extra_multiplier", 0);
    if (init.contains("baseline")) r.baseline = init_scheme_from_string(init.at("baseline").get<std::string>());
    if (j.contains("game")) r.game = game_config_from_json(j.at("game"));
    r.train_cfg.batch_size = j.value("batch_size", r.train_cfg.batch_size);
    r.train_cfg.learning_rate = j.value("learning_rate", r.train_cfg.learning_rate);
    r.train_cfg.epochs = j.value("epochs", r.train_cfg.epochs);
    r.train_cfg.dropout_rate = j.value("dropout_rate", r.train_cfg.dropout_rate);
    r.train_cfg.lr_decay_factor = j.value("lr_decay_factor", r.train_cfg.lr_decay_factor);
    r.train_cfg.lr_decay_every = j.value("lr_decay_every", r.train_cfg.lr_decay_every);
    r.seed = j.value("seed", r.seed);
    const auto precision = j.value("precision", std::string("float64"));
    if (precision != "float32" && precision != "float64") throw Error(ErrorKind::Config, "bad precision");
    r.precision = precision == "float32" ? Precision::Float32 : Precision::Float64;
    r.output_dir = j.value("output_dir", std::string{});
    r.train_cfg.shuffle_seed = r.seed;
    r.train_cfg.validate();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, e.what());
  }
}

Json to_json(const TrainRun& r) {
  Json init = {{"scheme", to_string(r.scheme)}, {"hyperplanes", r.hyperplanes}, {"extra_multiplier", r.extra_multiplier}};
  if (r.baseline) init["baseline"] = to_string(*r.baseline);
  return {{"train", r.train},
          {"val", r.val},
          {"val_fraction", r.val_fraction},
          {"split_seed", r.split_seed},
          {"hidden", r.arch.hidden},
          {"activation", to_string(r.arch.hidden_activation)},
          {"init", init},
          {"game", to_json(r.game)},
          {"batch_size", r.train_cfg.batch_size},
          {"learning_rate", r.train_cfg.learning_rate},
          {"epochs", r.train_cfg.epochs},
          {"dropout_rate", r.train_cfg.dropout_rate},
          {"lr_decay_factor", r.train_cfg.lr_decay_factor},
          {"lr_decay_every", r.train_cfg.lr_decay_every},
          {"seed", r.seed},
          {"precision", r.precision == Precision::Float32 ? "float32" : "float64"},
          {"output_dir", r.output_dir.string()}};
}

template <typename Scalar>
std::pair<TrialRecord, Json> train_and_checkpoint(const Architecture& arch, const InitSpec& init, const TrainConfig& tc,
                                                  const LabeledDataset& train_set, const LabeledDataset& val_set) {
  auto net = build_network<Scalar>(arch, init);
  const Matrix<Scalar> tx = train_set.features_as<Scalar>();
  const Matrix<Scalar> vx = val_set.features_as<Scalar>();
  auto record = train(net, DataRef<Scalar>{tx, train_set.labels()}, DataRef<Scalar>{vx, val_set.labels()}, tc);
  return {std::move(record), checkpoint_json(net)};
}

}  // namespace

int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train one network from a JSON run config", "train"};
  std::string config_path;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "Run config (or a manifest from an earlier run)")->required();
  app.add_option("--epochs", epochs, "Override the epoch count");
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--out", out_dir, "Override the output directory");
  bool done = false;
  if (const int code = parse_args(app, "train", args, out, err, done); done) return code;

  TrainRun run;
  std::optional<LabeledDataset> train_set;
  std::optional<LabeledDataset> val_set;
  HyperplaneFile planes;
  Json manifest;
  const auto load_start = Clock::now();
  double game_seconds = 0.0;
  try {
    run = train_run_from_json(load_config(config_path));
    if (epochs) run.train_cfg.epochs = *epochs;
    if (seed) run.seed = run.train_cfg.shuffle_seed = *seed;
    if (!out_dir.empty()) run.output_dir = out_dir;
    if (run.output_dir.empty()) run.output_dir = results_root() / ("train_" + std::filesystem::path(config_path).stem().string());
    run.train_cfg.validate();

    auto full = load_dataset(run.train);
    if (run.val.empty()) {
      auto [tr, va] = split(full, run.val_fraction, run.split_seed);
      train_set.emplace(std::move(tr));
      val_set.emplace(std::move(va));
    } else {
      train_set.emplace(std::move(full));
      val_set.emplace(load_dataset(run.val));
    }
    if (val_set->dim() != train_set->dim()) throw Error(ErrorKind::DimensionMismatch, "train/val widths differ");

    manifest = manifest_base("train", to_json(run));
    manifest["dataset_hashes"]["train"] = dataset_hash(*train_set);
    manifest["dataset_hashes"]["val"] = dataset_hash(*val_set);

    if (run.scheme == InitScheme::SortingGame) {
      if (!run.hyperplanes.empty()) {
        planes = read_hyperplanes(run.hyperplanes);
      } else {
        const auto game_start = Clock::now();
        planes.game = run_game<double>(train_set->features(), train_set->labels(), train_set->n_classes(), run.game);
        planes.config = run.game;
        planes.dataset_hash = manifest["dataset_hashes"]["train"];
        game_seconds = seconds_since(game_start);
      }
      if (planes.game.dim != train_set->dim()) {
        throw Error(ErrorKind::DimensionMismatch, "hyperplanes have dimension " + std::to_string(planes.game.dim) +
                                                      " but the data has " + std::to_string(train_set->dim()));
      }
      if (planes.game.hyperplanes.empty()) throw Error(ErrorKind::Empty, "hyperplane file holds no hyperplanes");
    }
  } catch (const Error& e) {
    err << "train: " << e.what() << '\n';
    return exit_code_for(e) == kDimensionMismatch ? kDimensionMismatch : kLoadError;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kLoadError;
  }
  const double load_seconds = seconds_since(load_start) - game_seconds;

  run.arch.inputs = train_set->dim();
  run.arch.outputs = std::max(train_set->n_classes(), val_set->n_classes());
  InitSpec init;
  init.scheme = run.scheme;
  init.hyperplanes = run.scheme == InitScheme::SortingGame ? &planes.game : nullptr;
  init.extra_multiplier = run.extra_multiplier;
  init.rng_seed = run.seed;
  init.baseline = run.baseline;

  std::pair<TrialRecord, Json> result;
  const auto train_start = Clock::now();
  try {
    result = run.precision == Precision::Float32
                 ? train_and_checkpoint<float>(run.arch, init, run.train_cfg, *train_set, *val_set)
                 : train_and_checkpoint<double>(run.arch, init, run.train_cfg, *train_set, *val_set);
  } catch (const Error& e) {
    err << "train: " << e.what() << '\n';
    return e.kind() == ErrorKind::DimensionMismatch ? kDimensionMismatch
           : e.kind() == ErrorKind::Config          ? kLoadError
                                                    : kRunFailed;
  }
  const double train_seconds = seconds_since(train_start);
  auto& [record, checkpoint] = result;
  record.init_scheme = to_string(run.scheme);
  record.seed = run.seed;

  try {
    const auto csv = run.output_dir / "trial.csv";
    const auto ckpt = run.output_dir / "checkpoint.json";
    write_trial_csv(csv, record);
    write_file_atomic(ckpt, checkpoint.dump() + "\n");
    manifest["seeds"] = {{"init", run.seed}, {"shuffle", run.train_cfg.shuffle_seed}, {"split", run.split_seed}};
    manifest["outputs"] = {csv.string(), ckpt.string()};
    manifest["timings"] = {{"load_seconds", load_seconds},
                           {"game_seconds", game_seconds},
                           {"train_seconds", train_seconds},
                           {"epoch_seconds", record.epoch_seconds}};
    if (run.scheme == InitScheme::SortingGame) manifest["results"]["hyperplanes"] = planes.game.hyperplanes.size();
    if (!record.epochs.empty()) {
      manifest["results"]["final_train_accuracy"] = record.epochs.back().train_accuracy;
      manifest["results"]["final_val_accuracy"] = record.epochs.back().val_accuracy;
    }
    write_file_atomic(run.output_dir / "manifest.json", manifest.dump(1) + "\n");
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kLoadError;
  }

  out << "epochs: " << record.epochs.size() << '\n';
  if (!record.epochs.empty()) {
    const auto& last = record.epochs.back();
    out << std::fixed << std::setprecision(4) << "final train_acc " << last.train_accuracy << " val_acc "
        << last.val_accuracy << '\n';
  }
  out << "wrote " << (run.output_dir / "trial.csv").string() << '\n';
  return kOk;
}

int cmd_bench(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run an LDA-versus-random comparison grid", "bench"};
  std::string config_path;
  std::optional<int> jobs;
  std::string results;
  app.add_option("--config", config_path, "Experiment config (or a manifest from an earlier run)")->required();
  app.add_option("--jobs", jobs, "Parallel training workers");
  app.add_option("--results", results, "Override the results directory");
  bool done = false;
  if (const int code = parse_args(app, "bench", args, out, err, done); done) return code;

  Json raw;
  ExperimentConfig cfg;
  try {
    raw = load_config(config_path);
    if (jobs) raw["jobs"] = *jobs;
    if (!results.empty()) raw["results_dir"] = results;
    if (raw.value("results_dir", std::string{}).empty()) {
      raw["results_dir"] = (results_root() / ("bench_" + std::filesystem::path(config_path).stem().string())).string();
    }
    cfg = experiment_config_from_json(raw);
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << '\n';
    return kLoadError;
  }

  const auto load_start = Clock::now();
  std::optional<Experiment> experiment;
  try {
    experiment.emplace(cfg);
  } catch (const Error& e) {
    err << "bench: " << e.what() << '\n';
    return e.kind() == ErrorKind::DimensionMismatch ? kDimensionMismatch : kLoadError;
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << '\n';
    return kLoadError;
  }
  const double prepare_seconds = seconds_since(load_start);
  out << "hyperplanes: " << experiment->hyperplanes().game.hyperplanes.size() << '\n';

  Json manifest = manifest_base("bench", to_json(cfg));
  if (raw.contains("size_match")) manifest["config"]["size_match"] = raw.at("size_match");
  manifest["dataset_hashes"]["train"] = dataset_hash(experiment->train_set());
  manifest["dataset_hashes"]["val"] = dataset_hash(experiment->val_set());
  manifest["seeds"] = {{"base", cfg.base_seed}, {"baseline_offset", cfg.baseline_seed_offset}, {"game", cfg.game.rng_seed}};

  const auto grid_start = Clock::now();
  std::vector<CellSummary> cells;
  try {
    cells = experiment->run_grid();
  } catch (const std::exception& e) {
    err << "bench: a cell aborted: " << e.what() << '\n';
    return kRunFailed;
  }
  const double grid_seconds = seconds_since(grid_start);
  out << summary_table(cells, false) << '\n' << summary_table(cells, true);

  Json size_json;
  double size_seconds = 0.0;
  if (raw.contains("size_match")) {
    const auto& sm = raw.at("size_match");
    const auto size_start = Clock::now();
    try {
      const auto candidates = sm.at("candidates").get<std::vector<Index>>();
      const auto match = experiment->size_match(sm.at("batch_size").get<Index>(), sm.at("learning_rate").get<double>(),
                                                candidates);
      size_json = {{"batch_size", sm.at("batch_size")},
                   {"learning_rate", sm.at("learning_rate")},
                   {"reference_accuracy", match.reference_accuracy},
                   {"candidates", Json::array()},
                   {"matched", match.matched ? Json(*match.matched) : Json("NotMatched")}};
      for (const auto& [w, acc] : match.candidates) size_json["candidates"].push_back({{"width", w}, {"accuracy", acc}});
      write_file_atomic(cfg.results_dir / "size_match.json", size_json.dump(1) + "\n");
      out << "\nsize match: " << size_json["matched"].dump() << " (reference accuracy " << match.reference_accuracy
          << ")\n";
    } catch (const std::exception& e) {
      err << "bench: size match failed: " << e.what() << '\n';
      return kRunFailed;
    }
    size_seconds = seconds_since(size_start);
  }

  try {
    manifest["outputs"] = {(cfg.results_dir / "summary.json").string(), (cfg.results_dir / "summary.csv").string()};
    manifest["timings"] = {{"prepare_seconds", prepare_seconds},
                           {"game_seconds", experiment->game_seconds()},
                           {"grid_seconds", grid_seconds},
                           {"size_match_seconds", size_seconds}};
    manifest["results"] = {{"hyperplanes", experiment->hyperplanes().game.hyperplanes.size()},
                           {"cells", Json::array()}};
    for (const auto& c : cells) manifest["results"]["cells"].push_back(to_json(c));
    if (!size_json.is_null()) manifest["results"]["size_match"] = size_json;
    write_file_atomic(cfg.results_dir / "manifest.json", manifest.dump(1) + "\n");
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << '\n';
    return kLoadError;
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const std::string usage =
      "usage: ldsort <sort|train|bench> [options]\n"
      "  sort   run the sorting game and write hyperplanes.json\n"
      "  train  train one network from a JSON config\n"
      "  bench  run an LDA-versus-random comparison grid\n";
  if (argc < 2) {
    err << usage;
    return kLoadError;
  }
  const std::string command = argv[1];
  const std::vector<std::string> rest(argv + 2, argv + argc);
  if (command == "sort") return cmd_sort(rest, out, err);
  if (command == "train") return cmd_train(rest, out, err);
  if (command == "bench") return cmd_bench(rest, out, err);
  if (command == "-h" || command == "--help") {
    out << usage;
    return kOk;
  }
  err << "unknown command '" << command << "'\n" << usage;
  return kLoadError;
}

}  // namespace ldsort::cli
