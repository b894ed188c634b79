#ifndef LDSORT_SERIALIZE_HPP
#define LDSORT_SERIALIZE_HPP

// File formats shared by the CLI stages: hyperplane JSON, network checkpoints, per-epoch CSV.

#include "ldsort/network.hpp"
#include "ldsort/sorting_game.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ldsort {

using Json = nlohmann::json;

const char* to_string(RemovalMode m) noexcept;
RemovalMode removal_mode_from_string(const std::string& s);

Json to_json(const GameConfig& cfg);
GameConfig game_config_from_json(const Json& j);

struct HyperplaneFile {
  SortingGameResult<double> game;
  GameConfig config;
  std::string dataset_hash;
};

Json to_json(const HyperplaneFile& file);
HyperplaneFile hyperplane_file_from_json(const Json& j);

void write_hyperplanes(const std::filesystem::path& path, const HyperplaneFile& file);
HyperplaneFile read_hyperplanes(const std::filesystem::path& path);

/// Header `epoch,train_acc,train_loss,val_acc,val_loss`; values in shortest round-trip form.
void write_trial_csv(const std::filesystem::path& path, const TrialRecord& record);
TrialRecord read_trial_csv(const std::filesystem::path& path);
std::string trial_csv(const TrialRecord& record);

/// Writes `contents` next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
Json read_json(const std::filesystem::path& path);

template <typename Scalar>
Json checkpoint_json(const Network<Scalar>& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers) {
    Json w = Json::array();
    for (Index i = 0; i < l.weights.size(); ++i) w.push_back(static_cast<double>(l.weights.data()[i]));
    Json b = Json::array();
    for (Index i = 0; i < l.bias.size(); ++i) b.push_back(static_cast<double>(l.bias(i)));
    layers.push_back({{"inputs", l.inputs()},
                      {"outputs", l.outputs()},
                      {"activation", to_string(l.activation)},
                      {"weights", std::move(w)},
                      {"bias", std::move(b)}});
  }
  return {{"format", "ldsort-checkpoint-v1"}, {"layers", std::move(layers)}};
}

template <typename Scalar>
Network<Scalar> network_from_checkpoint(const Json& j) {
  Network<Scalar> net;
  for (const auto& jl : j.at("layers")) {
    Layer<Scalar> l;
    const Index out = jl.at("outputs").get<Index>();
    const Index in = jl.at("inputs").get<Index>();
    const auto& w = jl.at("weights");
    const auto& b = jl.at("bias");
    if (static_cast<Index>(w.size()) != out * in || static_cast<Index>(b.size()) != out) {
      throw Error(ErrorKind::DimensionMismatch, "checkpoint layer arrays do not match their dimensions");
    }
    l.weights.resize(out, in);
    for (Index i = 0; i < out * in; ++i) l.weights.data()[i] = static_cast<Scalar>(w[static_cast<std::size_t>(i)].get<double>());
    l.bias.resize(out);
    for (Index i = 0; i < out; ++i) l.bias(i) = static_cast<Scalar>(b[static_cast<std::size_t>(i)].get<double>());
    l.activation = activation_from_string(jl.at("activation").get<std::string>());
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

}  // namespace ldsort

#endif  // LDSORT_SERIALIZE_HPP
