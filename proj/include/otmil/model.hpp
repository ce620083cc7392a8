#pragma once

// Instance classifier f: logistic regression (one fully connected layer) or a
// one-hidden-layer ReLU MLP, both with a two-way softmax head ordered
// [positive, negative]. Gradients are analytic.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otmil/numkit.hpp"

namespace otmil {

enum class Arch { linear, mlp };

inline std::string to_string(Arch a) { return a == Arch::linear ? "linear" : "mlp"; }

inline Arch parse_arch(const std::string& s) {
  if (s == "linear") return Arch::linear;
  if (s == "mlp") return Arch::mlp;
  throw Error("unknown arch '" + s + "'");
}

struct Layer {
  Matrix weights;  // out x in
  std::vector<double> bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ClassifierParams {
  Arch arch = Arch::linear;
  std::size_t feature_dim = 0;
  std::size_t hidden = 0;
  std::vector<Layer> layers;

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

// Same shape as the parameters they belong to.
using Gradients = ClassifierParams;

using ProbPair = std::array<double, 2>;

struct SgdConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
};

inline void validate(const SgdConfig& c) {
  if (!(c.learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (c.batch_size < 1) throw Error("batch_size must be >= 1");
}

inline ClassifierParams zeros_like(const ClassifierParams& p) {
  ClassifierParams z = p;
  for (auto& l : z.layers) {
    std::fill(l.weights.data().begin(), l.weights.data().end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

inline ClassifierParams make_classifier(Arch arch, std::size_t feature_dim, std::size_t hidden = 128) {
  if (feature_dim == 0) throw Error("feature_dim must be >= 1");
  ClassifierParams p{arch, feature_dim, arch == Arch::mlp ? hidden : 0, {}};
  if (arch == Arch::linear) {
    p.layers.push_back({Matrix(2, feature_dim), std::vector<double>(2, 0.0)});
  } else {
    if (hidden == 0) throw Error("mlp hidden size must be >= 1");
    p.layers.push_back({Matrix(hidden, feature_dim), std::vector<double>(hidden, 0.0)});
    p.layers.push_back({Matrix(2, hidden), std::vector<double>(2, 0.0)});
  }
  return p;
}

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
inline ClassifierParams init_classifier(Arch arch, std::size_t feature_dim, std::size_t hidden,
                                        Rng& rng) {
  auto p = make_classifier(arch, feature_dim, hidden);
  for (auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weights.cols()));
    for (double& w : l.weights.data()) w = rng.uniform(-bound, bound);
    for (double& b : l.bias) b = rng.uniform(-bound, bound);
  }
  return p;
}

namespace detail {
inline void check_dim(const ClassifierParams& p, std::size_t n) {
  if (n != p.feature_dim) {
    throw Error("feature dim mismatch: got " + std::to_string(n) + ", expected " +
                std::to_string(p.feature_dim));
  }
}

inline void affine(const Layer& l, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < l.weights.rows(); ++i) {
    const auto w = l.weights.row(i);
    double acc = l.bias[i];
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[j];
    out[i] = acc;
  }
}
}  // namespace detail

inline std::array<double, 2> logits(const ClassifierParams& p, std::span<const double> x) {
  detail::check_dim(p, x.size());
  std::array<double, 2> z{};
  if (p.arch == Arch::linear) {
    detail::affine(p.layers[0], x, z);
  } else {
    std::vector<double> h(p.hidden);
    detail::affine(p.layers[0], x, h);
    for (double& v : h) v = std::max(0.0, v);
    detail::affine(p.layers[1], h, z);
  }
  return z;
}

inline ProbPair forward(const ClassifierParams& p, std::span<const double> x) {
  const auto z = logits(p, x);
  return softmax2(z[0], z[1]);
}

inline double positive_prob(const ClassifierParams& p, std::span<const double> x) {
  return forward(p, x)[0];
}

inline constexpr double kLogFloor = 1e-12;

// -sum target * log(pred), pred clamped away from zero.
inline double soft_cross_entropy(const ProbPair& pred, const ProbPair& target) {
  double acc = 0.0;
  for (std::size_t c = 0; c < 2; ++c) {
    if (target[c] != 0.0) acc -= target[c] * std::log(std::max(pred[c], kLogFloor));
  }
  return acc;
}

// Accumulates d(loss)/d(params) into `grads` given the upstream gradient on
// the two logits.
inline void backward_logits(const ClassifierParams& p, std::span<const double> x,
                            const std::array<double, 2>& dlogits, Gradients& grads) {
  detail::check_dim(p, x.size());
  if (p.arch == Arch::linear) {
    auto& g = grads.layers[0];
    for (std::size_t c = 0; c < 2; ++c) {
      auto row = g.weights.row(c);
      for (std::size_t j = 0; j < x.size(); ++j) row[j] += dlogits[c] * x[j];
      g.bias[c] += dlogits[c];
    }
    return;
  }
  const auto& l0 = p.layers[0];
  const auto& l1 = p.layers[1];
  std::vector<double> h(p.hidden);
  detail::affine(l0, x, h);
  auto& g0 = grads.layers[0];
  auto& g1 = grads.layers[1];
  for (std::size_t k = 0; k < p.hidden; ++k) {
    const bool active = h[k] > 0.0;
    const double hk = active ? h[k] : 0.0;
    g1.weights(0, k) += dlogits[0] * hk;
    g1.weights(1, k) += dlogits[1] * hk;
    if (!active) continue;
    const double dh = dlogits[0] * l1.weights(0, k) + dlogits[1] * l1.weights(1, k);
    auto row = g0.weights.row(k);
    for (std::size_t j = 0; j < x.size(); ++j) row[j] += dh * x[j];
    g0.bias[k] += dh;
  }
  g1.bias[0] += dlogits[0];
  g1.bias[1] += dlogits[1];
}

// Adds the gradient of soft_cross_entropy(f(x), target) to `grads`; returns the loss.
inline double accumulate_gradient(const ClassifierParams& p, std::span<const double> x,
                                  const ProbPair& target, Gradients& grads) {
  const auto pred = forward(p, x);
  backward_logits(p, x, {pred[0] - target[0], pred[1] - target[1]}, grads);
  return soft_cross_entropy(pred, target);
}

struct Example {
  std::span<const double> features;
  ProbPair target;
};

// Exact gradient of the mean soft cross-entropy over the batch.
inline Gradients backward(const ClassifierParams& p, std::span<const Example> batch,
                          double* mean_loss = nullptr) {
  if (batch.empty()) throw Error("backward: empty batch");
  auto grads = zeros_like(p);
  double loss = 0.0;
  for (const auto& ex : batch) loss += accumulate_gradient(p, ex.features, ex.target, grads);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& l : grads.layers) {
    for (double& v : l.weights.data()) v *= inv;
    for (double& v : l.bias) v *= inv;
  }
  if (mean_loss) *mean_loss = loss * inv;
  return grads;
}

inline void sgd_step(ClassifierParams& p, const Gradients& g, double lr) {
  if (p.layers.size() != g.layers.size()) throw Error("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& pl = p.layers[i];
    const auto& gl = g.layers[i];
    if (pl.weights.rows() != gl.weights.rows() || pl.weights.cols() != gl.weights.cols() ||
        pl.bias.size() != gl.bias.size()) {
      throw Error("sgd_step: shape mismatch");
    }
    for (std::size_t j = 0; j < pl.weights.size(); ++j) pl.weights.data()[j] -= lr * gl.weights.data()[j];
    for (std::size_t j = 0; j < pl.bias.size(); ++j) pl.bias[j] -= lr * gl.bias[j];
  }
}

// Flat views, used by gradient checks.
inline std::vector<double> flatten(const ClassifierParams& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

inline void unflatten(ClassifierParams& p, std::span<const double> flat) {
  std::size_t k = 0;
  for (auto& l : p.layers) {
    for (double& v : l.weights.data()) v = flat[k++];
    for (double& v : l.bias) v = flat[k++];
  }
  if (k != flat.size()) throw Error("unflatten: size mismatch");
}

// ---------------------------------------------------------------------------
// Checkpoint JSON: {"arch", "feature_dim", "hidden", "layers": [{"rows",
// "cols", "weights": [...row-major], "bias": [...]}]}
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ClassifierParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", l.weights.data()},
                      {"bias", l.bias}});
  }
  return {{"arch", to_string(p.arch)},
          {"feature_dim", p.feature_dim},
          {"hidden", p.hidden},
          {"layers", std::move(layers)}};
}

inline ClassifierParams classifier_from_json(const nlohmann::json& j) {
  try {
    auto p = make_classifier(parse_arch(j.at("arch").get<std::string>()),
                             j.at("feature_dim").get<std::size_t>(),
                             j.value("hidden", std::size_t{128}));
    const auto& layers = j.at("layers");
    if (layers.size() != p.layers.size()) throw Error("checkpoint: wrong layer count");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& jl = layers[i];
      auto& l = p.layers[i];
      const auto rows = jl.at("rows").get<std::size_t>();
      const auto cols = jl.at("cols").get<std::size_t>();
      if (rows != l.weights.rows() || cols != l.weights.cols()) {
        throw Error("checkpoint: layer " + std::to_string(i) + " shape mismatch");
      }
      l.weights = Matrix(rows, cols, jl.at("weights").get<std::vector<double>>());
      l.bias = jl.at("bias").get<std::vector<double>>();
      if (l.bias.size() != rows) throw Error("checkpoint: bias length mismatch");
      if (!l.weights.all_finite()) throw Error("checkpoint: non-finite weights");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace otmil
