#ifndef LDSORT_NETWORK_HPP
#define LDSORT_NETWORK_HPP

// Fully-connected classifiers trained by plain minibatch SGD on softmax cross-entropy.

#include "ldsort/types.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace ldsort {

enum class Activation { Sigmoid, Tanh, ReLU, SoftmaxOutput };

inline const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
    case Activation::SoftmaxOutput: return "softmax";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::ReLU;
  if (s == "softmax") return Activation::SoftmaxOutput;
  throw Error(ErrorKind::Config, "unknown activation '" + s + "'");
}

template <typename Scalar>
struct Layer {
  Matrix<Scalar> weights;  // out x in
  Vector<Scalar> bias;     // out
  Activation activation = Activation::Sigmoid;

  Index inputs() const { return weights.cols(); }
  Index outputs() const { return weights.rows(); }
};

template <typename Scalar>
struct Network {
  std::vector<Layer<Scalar>> layers;

  Index inputs() const { return layers.front().inputs(); }
  Index outputs() const { return layers.back().outputs(); }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  void validate() const {
    if (layers.empty()) throw Error(ErrorKind::InvalidArgument, "network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.size() != l.outputs()) throw Error(ErrorKind::DimensionMismatch, "bias length != layer outputs");
      if (i + 1 < layers.size() && l.outputs() != layers[i + 1].inputs()) {
        throw Error(ErrorKind::DimensionMismatch, "layer dimensions do not chain");
      }
      const bool last = i + 1 == layers.size();
      if ((l.activation == Activation::SoftmaxOutput) != last) {
        throw Error(ErrorKind::InvalidArgument, "exactly the last layer must be the softmax output");
      }
    }
  }
};

template <typename Scalar>
struct LayerGrad {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
};

/// Per-layer inputs and dropout masks kept for backpropagation.
template <typename Scalar>
struct ForwardCache {
  std::vector<Matrix<Scalar>> inputs;       // input fed to layer l (after dropout)
  std::vector<Matrix<Scalar>> activations;  // output of hidden layer l before dropout
  std::vector<Matrix<Scalar>> masks;        // scaled keep masks; empty when dropout is off
};

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> probs;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
struct LossAndGrads {
  double loss = 0.0;
  std::vector<LayerGrad<Scalar>> grads;
};

/// Labelled rows; a non-owning view.
template <typename Scalar>
struct DataRef {
  Eigen::Ref<const Matrix<Scalar>> x;
  std::span<const int> y;
};

inline constexpr double kLogClamp = 1e-12;

/// Batch argument that does not take part in template deduction, so plain matrices and blocks
/// convert to Ref once Scalar is known from the network.
template <typename Scalar>
using BatchRef = std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>;

namespace detail {

template <typename Scalar>
void apply_activation(Matrix<Scalar>& z, Activation a) {
  switch (a) {
    case Activation::Sigmoid:
      z = (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
      break;
    case Activation::Tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::ReLU:
      z = z.array().max(Scalar(0)).matrix();
      break;
    case Activation::SoftmaxOutput: {
      const Vector<Scalar> row_max = z.rowwise().maxCoeff();
      z.colwise() -= row_max;
      z = z.array().exp().matrix();
      const Vector<Scalar> sums = z.rowwise().sum();
      z.array().colwise() /= sums.array();
      break;
    }
  }
}

// d activation / d pre-activation expressed through the activation output.
template <typename Scalar>
Matrix<Scalar> activation_slope(const Matrix<Scalar>& a, Activation act) {
  switch (act) {
    case Activation::Sigmoid: return (a.array() * (Scalar(1) - a.array())).matrix();
    case Activation::Tanh: return (Scalar(1) - a.array().square()).matrix();
    case Activation::ReLU: return (a.array() > Scalar(0)).template cast<Scalar>().matrix();
    case Activation::SoftmaxOutput: break;
  }
  throw Error(ErrorKind::InvalidArgument, "softmax slope is handled with the loss");
}

inline Index argmax_lowest(const auto& row) {
  Index best = 0;
  for (Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

}  // namespace detail

/// Class probabilities for a batch. Dropout (inverted scaling 1/(1-p)) is applied to hidden
/// activations only when `rng` is given and dropout_rate > 0.
template <typename Scalar>
ForwardResult<Scalar> forward(const Network<Scalar>& net, const BatchRef<Scalar>& batch,
                              double dropout_rate = 0.0, std::mt19937_64* rng = nullptr) {
  if (net.layers.empty() || batch.cols() != net.inputs()) {
    throw Error(ErrorKind::DimensionMismatch, "batch width does not match the network input");
  }
  const bool drop = rng != nullptr && dropout_rate > 0.0;
  const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - dropout_rate));

  ForwardResult<Scalar> out;
  auto& cache = out.cache;
  Matrix<Scalar> current = batch;
  for (const auto& layer : net.layers) {
    Matrix<Scalar> z = current * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    detail::apply_activation(z, layer.activation);
    cache.inputs.push_back(std::move(current));
    if (layer.activation == Activation::SoftmaxOutput) {
      out.probs = std::move(z);
      break;
    }
    cache.activations.push_back(z);
    if (drop) {
      std::bernoulli_distribution keep(1.0 - dropout_rate);
      Matrix<Scalar> mask(z.rows(), z.cols());
      for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? keep_scale : Scalar(0);
      z.array() *= mask.array();
      cache.masks.push_back(std::move(mask));
    }
    current = std::move(z);
  }
  return out;
}

/// Mean cross-entropy -log max(p_y, 1e-12) over the batch.
template <typename Scalar>
double cross_entropy(const Eigen::Ref<const Matrix<Scalar>>& probs, std::span<const int> labels) {
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    const auto p = static_cast<double>(probs(i, labels[static_cast<std::size_t>(i)]));
    total -= std::log(std::max(p, kLogClamp));
  }
  return total / static_cast<double>(probs.rows());
}

template <typename Scalar>
void check_labels(std::span<const int> labels, Index rows, Index classes) {
  if (static_cast<Index>(labels.size()) != rows) {
    throw Error(ErrorKind::DimensionMismatch, "label count does not match batch rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw Error(ErrorKind::BadLabel, "label outside the output range");
  }
}

/// Loss and exact parameter gradients under the sampled dropout mask.
template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(const Network<Scalar>& net, const BatchRef<Scalar>& batch,
                                    std::span<const int> labels, double dropout_rate = 0.0,
                                    std::mt19937_64* rng = nullptr) {
  auto fwd = forward(net, batch, dropout_rate, rng);
  check_labels<Scalar>(labels, batch.rows(), net.outputs());

  LossAndGrads<Scalar> out;
  out.loss = cross_entropy<Scalar>(fwd.probs, labels);
  if (!std::isfinite(out.loss)) throw Error(ErrorKind::NonFiniteLoss, "loss is not finite");

  const auto inv_batch = static_cast<Scalar>(1.0 / static_cast<double>(batch.rows()));
  Matrix<Scalar> delta = std::move(fwd.probs);
  for (Index i = 0; i < delta.rows(); ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
  delta *= inv_batch;

  const auto& cache = fwd.cache;
  out.grads.resize(net.layers.size());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    out.grads[l].weights = delta.transpose() * cache.inputs[l];
    out.grads[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix<Scalar> upstream = delta * layer.weights;
    if (!cache.masks.empty()) upstream.array() *= cache.masks[l - 1].array();
    delta = (upstream.array() * detail::activation_slope(cache.activations[l - 1], net.layers[l - 1].activation).array())
                .matrix();
  }
  return out;
}

template <typename Scalar>
void sgd_step(Network<Scalar>& net, const std::vector<LayerGrad<Scalar>>& grads, double learning_rate) {
  const auto eta = static_cast<Scalar>(learning_rate);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l].weights.noalias() -= eta * grads[l].weights;
    net.layers[l].bias.noalias() -= eta * grads[l].bias;
  }
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Accuracy (argmax, ties to the lowest class) and mean loss, without dropout.
template <typename Scalar>
Evaluation evaluate(const Network<Scalar>& net, const DataRef<Scalar>& data, Index chunk = 4096) {
  const Index n = data.x.rows();
  if (n == 0) throw Error(ErrorKind::Empty, "cannot evaluate on an empty dataset");
  check_labels<Scalar>(data.y, n, net.outputs());
  Index correct = 0;
  double loss_sum = 0.0;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    const auto probs = forward(net, data.x.middleRows(start, len)).probs;
    const auto labels = data.y.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
    for (Index i = 0; i < len; ++i) {
      if (detail::argmax_lowest(probs.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    loss_sum += cross_entropy<Scalar>(probs, labels) * static_cast<double>(len);
  }
  return {static_cast<double>(correct) / static_cast<double>(n), loss_sum / static_cast<double>(n)};
}

struct TrainConfig {
  Index batch_size = 100;
  double learning_rate = 0.01;
  int epochs = 10;
  double dropout_rate = 0.0;
  double lr_decay_factor = 1.0;
  int lr_decay_every = 0;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning_rate must be > 0");
    if (epochs < 0) throw Error(ErrorKind::Config, "epochs must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorKind::Config, "dropout_rate must lie in [0, 1)");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
      throw Error(ErrorKind::Config, "lr_decay_factor must lie in (0, 1]");
    }
    if (lr_decay_every < 0) throw Error(ErrorKind::Config, "lr_decay_every must be >= 0");
  }

  /// Step size used during `epoch` (1-based); decays take effect after epochs every, 2*every, ...
  double learning_rate_at(int epoch) const {
    if (lr_decay_every <= 0) return learning_rate;
    return learning_rate * std::pow(lr_decay_factor, (epoch - 1) / lr_decay_every);
  }
};

struct EpochMetrics {
  double train_accuracy = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
};

struct TrialRecord {
  std::string init_scheme;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  std::vector<double> epoch_seconds;
};

/// Minibatch SGD. Each epoch reshuffles the training rows, trains on every full batch and the
/// trailing partial one, then evaluates train and validation sets in eval mode.
template <typename Scalar>
TrialRecord train(Network<Scalar>& net, const DataRef<Scalar>& train_set, const DataRef<Scalar>& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  const Index n = train_set.x.rows();
  if (n == 0 || val_set.x.rows() == 0) throw Error(ErrorKind::Empty, "training and validation sets must be nonempty");
  check_labels<Scalar>(train_set.y, n, net.outputs());

  TrialRecord record;
  record.seed = cfg.shuffle_seed;
  std::mt19937_64 shuffle_rng(cfg.shuffle_seed);
  std::mt19937_64 dropout_rng(mix_seed(cfg.shuffle_seed, 1));
  std::mt19937_64* dropout = cfg.dropout_rate > 0.0 ? &dropout_rng : nullptr;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Matrix<Scalar> batch;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double eta = cfg.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, n - start);
      batch.resize(len, train_set.x.cols());
      batch_labels.resize(static_cast<std::size_t>(len));
      for (Index i = 0; i < len; ++i) {
        const Index row = order[static_cast<std::size_t>(start + i)];
        batch.row(i) = train_set.x.row(row);
        batch_labels[static_cast<std::size_t>(i)] = train_set.y[static_cast<std::size_t>(row)];
      }
      const auto step = loss_and_grads<Scalar>(net, batch, batch_labels, cfg.dropout_rate, dropout);
      sgd_step(net, step.grads, eta);
    }
    const auto tr = evaluate(net, train_set);
    const auto va = evaluate(net, val_set);
    record.epochs.push_back({tr.accuracy, tr.loss, va.accuracy, va.loss});
    record.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  }
  return record;
}

}  // namespace ldsort

#endif  // LDSORT_NETWORK_HPP
