#pragma once

// Bag-classification comparison arms trained end-to-end on bag labels:
// max- and mean-pooling of instance scores, and attention pooling
//   alpha_k = softmax_k(w^T tanh(V x_k)),  z = sum_k alpha_k x_k,
// followed by a linear two-way head on z.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "otmil/data.hpp"
#include "otmil/eval.hpp"
#include "otmil/model.hpp"
#include "otmil/numkit.hpp"

namespace otmil {

enum class PoolKind { max, mean, attention };

inline std::string to_string(PoolKind k) {
  switch (k) {
    case PoolKind::max: return "max";
    case PoolKind::mean: return "mean";
    case PoolKind::attention: return "attention";
  }
  return "?";
}

inline PoolKind parse_pool_kind(const std::string& s) {
  if (s == "max") return PoolKind::max;
  if (s == "mean") return PoolKind::mean;
  if (s == "attention") return PoolKind::attention;
  throw Error("unknown baseline kind '" + s + "'");
}

struct AttentionParams {
  Matrix V;               // L x M
  std::vector<double> w;  // L
  ClassifierParams head;  // linear over the M-dim bag feature
};

struct BaselineModel {
  PoolKind kind = PoolKind::max;
  ClassifierParams instance_clf;  // max / mean
  AttentionParams attention;      // attention
};

struct BaselineConfig {
  Arch arch = Arch::linear;
  std::size_t hidden = 128;
  std::size_t attention_hidden = 64;  // L
};

inline BaselineModel init_baseline(PoolKind kind, std::size_t feature_dim,
                                   const BaselineConfig& cfg, Rng& rng) {
  BaselineModel m;
  m.kind = kind;
  if (kind == PoolKind::attention) {
    const std::size_t L = cfg.attention_hidden;
    if (L == 0) throw Error("attention hidden size must be >= 1");
    m.attention.V = Matrix(L, feature_dim);
    const double bv = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (double& v : m.attention.V.data()) v = rng.uniform(-bv, bv);
    const double bw = 1.0 / std::sqrt(static_cast<double>(L));
    m.attention.w.resize(L);
    for (double& v : m.attention.w) v = rng.uniform(-bw, bw);
    m.attention.head = init_classifier(Arch::linear, feature_dim, 0, rng);
  } else {
    m.instance_clf = init_classifier(cfg.arch, feature_dim, cfg.hidden, rng);
  }
  return m;
}

struct AttentionOutput {
  std::vector<double> bag_feature;
  std::vector<double> attn;
};

inline AttentionOutput attention_pool(const AttentionParams& p, const Matrix& bag_features) {
  if (bag_features.rows() == 0) throw Error("attention_pool: empty bag");
  if (bag_features.cols() != p.V.cols()) throw Error("attention_pool: feature dim mismatch");
  const std::size_t K = bag_features.rows();
  std::vector<double> s(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto xk = bag_features.row(k);
    double acc = 0.0;
    for (std::size_t l = 0; l < p.V.rows(); ++l) acc += p.w[l] * std::tanh(dot(p.V.row(l), xk));
    s[k] = acc;
  }
  AttentionOutput out{std::vector<double>(bag_features.cols(), 0.0), softmax(s)};
  for (std::size_t k = 0; k < K; ++k) {
    const auto x = bag_features.row(k);
    for (std::size_t j = 0; j < x.size(); ++j) out.bag_feature[j] += out.attn[k] * x[j];
  }
  return out;
}

inline Matrix bag_matrix(const Bag& bag, std::size_t dim) {
  Matrix m(bag.instances.size(), dim);
  for (std::size_t k = 0; k < bag.instances.size(); ++k) {
    const auto& f = bag.instances[k].features;
    if (f.size() != dim) throw Error("bag_matrix: feature dim mismatch");
    std::copy(f.begin(), f.end(), m.row(k).begin());
  }
  return m;
}

// Min-max normalization over an evaluation corpus; a constant corpus maps to 0.5.
inline std::vector<double> attention_instance_scores(std::span<const double> attn) {
  std::vector<double> out(attn.size(), 0.5);
  if (attn.empty()) return out;
  const auto [lo, hi] = std::minmax_element(attn.begin(), attn.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < attn.size(); ++i) out[i] = (attn[i] - *lo) / range;
  return out;
}

// ---------------------------------------------------------------------------
// Bag loss and analytic gradients
// ---------------------------------------------------------------------------

inline constexpr double kBagProbFloor = 1e-12;

// Bag-level positive probability.
inline double baseline_bag_prob(const BaselineModel& m, const Bag& bag, std::size_t dim) {
  if (bag.instances.empty()) throw Error("empty bag");
  if (m.kind == PoolKind::attention) {
    const auto out = attention_pool(m.attention, bag_matrix(bag, dim));
    return forward(m.attention.head, out.bag_feature)[0];
  }
  std::vector<double> p;
  p.reserve(bag.instances.size());
  for (const auto& inst : bag.instances) p.push_back(positive_prob(m.instance_clf, inst.features));
  return pool_scores(p, m.kind == PoolKind::max ? BagInference::max : BagInference::mean);
}

inline BaselineModel zeros_like(const BaselineModel& m) {
  BaselineModel z = m;
  if (m.kind == PoolKind::attention) {
    std::fill(z.attention.V.data().begin(), z.attention.V.data().end(), 0.0);
    std::fill(z.attention.w.begin(), z.attention.w.end(), 0.0);
    z.attention.head = zeros_like(m.attention.head);
  } else {
    z.instance_clf = zeros_like(m.instance_clf);
  }
  return z;
}

// Adds the gradient of the bag cross-entropy into `g` and returns the loss.
inline double accumulate_bag_gradient(const BaselineModel& m, const Bag& bag, std::size_t dim,
                                      BaselineModel& g) {
  if (bag.instances.empty()) throw Error("empty bag");
  const double y = bag.positive() ? 1.0 : 0.0;

  if (m.kind != PoolKind::attention) {
    const std::size_t K = bag.instances.size();
    std::vector<double> p(K);
    for (std::size_t k = 0; k < K; ++k) p[k] = positive_prob(m.instance_clf, bag.instances[k].features);
    const auto mode = m.kind == PoolKind::max ? BagInference::max : BagInference::mean;
    const double s = std::clamp(pool_scores(p, mode), kBagProbFloor, 1.0 - kBagProbFloor);
    const double loss = -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
    const double dl_ds = (s - y) / (s * (1.0 - s));
    if (mode == BagInference::max) {
      // Winner takes the whole subgradient; lowest index on ties.
      const auto k = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      const double d = dl_ds * p[k] * (1.0 - p[k]);
      backward_logits(m.instance_clf, bag.instances[k].features, {d, -d}, g.instance_clf);
    } else {
      const double inv_k = 1.0 / static_cast<double>(K);
      for (std::size_t k = 0; k < K; ++k) {
        const double d = dl_ds * inv_k * p[k] * (1.0 - p[k]);
        backward_logits(m.instance_clf, bag.instances[k].features, {d, -d}, g.instance_clf);
      }
    }
    return loss;
  }

  const auto& a = m.attention;
  const Matrix x = bag_matrix(bag, dim);
  const std::size_t K = x.rows();
  const std::size_t L = a.V.rows();

  // Forward, keeping tanh activations.
  Matrix h(K, L);
  std::vector<double> s(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto xk = x.row(k);
    double acc = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const double t = std::tanh(dot(a.V.row(l), xk));
      h(k, l) = t;
      acc += a.w[l] * t;
    }
    s[k] = acc;
  }
  const auto alpha = softmax(s);
  std::vector<double> z(dim, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto xk = x.row(k);
    for (std::size_t j = 0; j < dim; ++j) z[j] += alpha[k] * xk[j];
  }
  const auto pred = forward(a.head, z);
  const ProbPair target{y, 1.0 - y};
  const double loss = soft_cross_entropy(pred, target);

  // Head.
  const std::array<double, 2> dlog{pred[0] - target[0], pred[1] - target[1]};
  backward_logits(a.head, z, dlog, g.attention.head);
  std::vector<double> dz(dim, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto wr = a.head.layers[0].weights.row(c);
    for (std::size_t j = 0; j < dim; ++j) dz[j] += dlog[c] * wr[j];
  }
  // Through the weighted sum and the softmax over instances.
  std::vector<double> dalpha(K);
  double mean_dalpha = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    dalpha[k] = dot(x.row(k), dz);
    mean_dalpha += alpha[k] * dalpha[k];
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double ds = alpha[k] * (dalpha[k] - mean_dalpha);
    const auto xk = x.row(k);
    for (std::size_t l = 0; l < L; ++l) {
      const double t = h(k, l);
      g.attention.w[l] += ds * t;
      const double du = ds * a.w[l] * (1.0 - t * t);
      auto gv = g.attention.V.row(l);
      for (std::size_t j = 0; j < dim; ++j) gv[j] += du * xk[j];
    }
  }
  return loss;
}

inline std::vector<double> flatten(const BaselineModel& m) {
  if (m.kind != PoolKind::attention) return flatten(m.instance_clf);
  std::vector<double> out(m.attention.V.data());
  out.insert(out.end(), m.attention.w.begin(), m.attention.w.end());
  const auto head = flatten(m.attention.head);
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

inline void unflatten(BaselineModel& m, std::span<const double> flat) {
  if (m.kind != PoolKind::attention) {
    unflatten(m.instance_clf, flat);
    return;
  }
  const std::size_t nv = m.attention.V.size();
  const std::size_t nw = m.attention.w.size();
  if (flat.size() < nv + nw) throw Error("unflatten: size mismatch");
  std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(nv), m.attention.V.data().begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(nv),
            flat.begin() + static_cast<std::ptrdiff_t>(nv + nw), m.attention.w.begin());
  unflatten(m.attention.head, flat.subspan(nv + nw));
}

inline void sgd_step(BaselineModel& m, const BaselineModel& g, double lr) {
  auto theta = flatten(m);
  const auto grad = flatten(g);
  if (theta.size() != grad.size()) throw Error("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
  unflatten(m, theta);
}

struct BaselineTrainResult {
  BaselineModel model;
  std::vector<double> epoch_loss;
};

inline BaselineTrainResult pool_baseline_train(const Dataset& ds, PoolKind kind,
                                               const SgdConfig& sgd,
                                               const BaselineConfig& cfg = {}) {
  validate(sgd);
  validate(ds, /*require_both_classes=*/true);
  Rng rng(sgd.seed);
  BaselineTrainResult res{init_baseline(kind, ds.feature_dim, cfg, rng), {}};
  std::vector<std::size_t> order(ds.bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < sgd.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += sgd.batch_size) {
      const std::size_t end = std::min(order.size(), start + sgd.batch_size);
      auto g = zeros_like(res.model);
      for (std::size_t i = start; i < end; ++i) {
        total += accumulate_bag_gradient(res.model, ds.bags[order[i]], ds.feature_dim, g);
      }
      const double scale = sgd.learning_rate / static_cast<double>(end - start);
      sgd_step(res.model, g, scale);
    }
    res.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  return res;
}

// Per-instance scores: classifier probability for max/mean, corpus-normalized
// attention weight for attention.
inline InstanceScores baseline_instance_scores(const BaselineModel& m, const Dataset& ds) {
  InstanceScores out;
  if (m.kind != PoolKind::attention) return instance_scores(m.instance_clf, ds);
  std::vector<double> raw;
  for (const auto& bag : ds.bags) {
    const auto pooled = attention_pool(m.attention, bag_matrix(bag, ds.feature_dim));
    for (std::size_t k = 0; k < bag.instances.size(); ++k) {
      if (!bag.instances[k].true_label) continue;
      raw.push_back(pooled.attn[k]);
      out.labels.push_back(to_int(*bag.instances[k].true_label));
    }
  }
  out.scores = attention_instance_scores(raw);
  return out;
}

inline ClassifierReport evaluate_baseline(const BaselineModel& m, const Dataset& ds) {
  ClassifierReport r;
  const auto inst = baseline_instance_scores(m, ds);
  r.instance_auc = auc_or_nan(inst.scores, inst.labels);
  BagScores bags;
  for (const auto& bag : ds.bags) {
    bags.scores.push_back(baseline_bag_prob(m, bag, ds.feature_dim));
    bags.labels.push_back(to_int(bag.label));
  }
  r.bag_auc = auc_or_nan(bags.scores, bags.labels);
  r.bag_accuracy = accuracy_at(bags.scores, bags.labels);
  return r;
}

}  // namespace otmil
