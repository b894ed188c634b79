#ifndef LDSORT_MODEL_HPP
#define LDSORT_MODEL_HPP

#include "ldsort/initializers.hpp"
#include "ldsort/network.hpp"

#include <optional>
#include <vector>

namespace ldsort {

inline InitScheme baseline_scheme(Activation hidden) {
  return hidden == Activation::ReLU ? InitScheme::HeNormal : InitScheme::Orthogonal;
}

inline const char* to_string(InitScheme s) noexcept {
  switch (s) {
    case InitScheme::SortingGame: return "sorting_game";
    case InitScheme::Orthogonal: return "orthogonal";
    case InitScheme::XavierNormal: return "xavier_normal";
    case InitScheme::HeNormal: return "he_normal";
  }
  return "unknown";
}

inline InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "sorting_game" || s == "lda") return InitScheme::SortingGame;
  if (s == "orthogonal") return InitScheme::Orthogonal;
  if (s == "xavier_normal" || s == "xavier") return InitScheme::XavierNormal;
  if (s == "he_normal" || s == "he") return InitScheme::HeNormal;
  throw Error(ErrorKind::Config, "unknown init scheme '" + s + "'");
}

struct InitSpec {
  InitScheme scheme = InitScheme::Orthogonal;
  const SortingGameResult<double>* hyperplanes = nullptr;
  int extra_multiplier = 0;
  std::uint64_t rng_seed = 0;
  /// Scheme for extra first-layer neurons and all later layers of a sorting-game network;
  /// defaults to the activation's baseline.
  std::optional<InitScheme> baseline;
};

struct Architecture {
  Index inputs = 0;
  /// Hidden widths. A leading 0 with the sorting-game scheme means "h * (1 + extra_multiplier)".
  std::vector<Index> hidden;
  Index outputs = 0;
  Activation hidden_activation = Activation::Sigmoid;
};

/// Width of the first hidden layer once the sorting-game rows are accounted for.
inline Index first_hidden_width(const Architecture& arch, const InitSpec& init) {
  if (arch.hidden.empty()) throw Error(ErrorKind::Config, "architecture needs at least one hidden layer");
  if (init.scheme != InitScheme::SortingGame) return arch.hidden.front();
  if (init.hyperplanes == nullptr) throw Error(ErrorKind::Config, "sorting_game init requires hyperplanes");
  const auto h = static_cast<Index>(init.hyperplanes->hyperplanes.size());
  const Index derived = h * (1 + init.extra_multiplier);
  if (arch.hidden.front() != 0 && arch.hidden.front() != derived) {
    throw Error(ErrorKind::Config, "first hidden width " + std::to_string(arch.hidden.front()) +
                                       " disagrees with hyperplane count x (1 + extra_multiplier) = " +
                                       std::to_string(derived));
  }
  return derived;
}

/// Network with zero biases everywhere except the sorting-game rows. Layer l is seeded by
/// mix_seed(rng_seed, l), so with fixed hyperplanes the seed only moves the random rows.
template <typename Scalar>
Network<Scalar> build_network(const Architecture& arch, const InitSpec& init) {
  if (arch.inputs < 1 || arch.outputs < 2) throw Error(ErrorKind::Config, "bad input/output width");
  if (arch.hidden_activation == Activation::SoftmaxOutput) {
    throw Error(ErrorKind::Config, "softmax is reserved for the output layer");
  }
  std::vector<Index> widths{arch.inputs, first_hidden_width(arch, init)};
  for (std::size_t i = 1; i < arch.hidden.size(); ++i) widths.push_back(arch.hidden[i]);
  widths.push_back(arch.outputs);

  const InitScheme later =
      init.scheme == InitScheme::SortingGame ? init.baseline.value_or(baseline_scheme(arch.hidden_activation))
                                             : init.scheme;
  Network<Scalar> net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer<Scalar> layer;
    const bool last = l + 2 == widths.size();
    layer.activation = last ? Activation::SoftmaxOutput : arch.hidden_activation;
    const std::uint64_t seed = mix_seed(init.rng_seed, l);
    if (l == 0 && init.scheme == InitScheme::SortingGame) {
      if (init.hyperplanes->dim != arch.inputs) {
        throw Error(ErrorKind::DimensionMismatch, "hyperplane dimension " + std::to_string(init.hyperplanes->dim) +
                                                      " != input width " + std::to_string(arch.inputs));
      }
      auto first = sorting_game_layer<Scalar>(*init.hyperplanes, init.extra_multiplier, seed, later);
      layer.weights = std::move(first.weights);
      layer.bias = std::move(first.bias);
    } else {
      layer.weights = random_init<Scalar>(later, widths[l + 1], widths[l], seed);
      layer.bias = Vector<Scalar>::Zero(widths[l + 1]);
    }
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

}  // namespace ldsort

#endif  // LDSORT_MODEL_HPP
