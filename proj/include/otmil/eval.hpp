#pragma once

// Metrics: rank-based ROC AUC, bag inference, pseudo-label quality, and the
// instance-vs-bag label entropy analytics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "otmil/data.hpp"
#include "otmil/labeling.hpp"
#include "otmil/model.hpp"

namespace otmil {

struct RocResult {
  double auc = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Mann-Whitney statistic with mid-ranks: ties between a positive and a
// negative count one half.
inline RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("roc_auc: length mismatch");
  RocResult res;
  for (int l : labels) (l ? res.n_pos : res.n_neg)++;
  if (res.n_pos == 0 || res.n_neg == 0) throw Error("AUC undefined: single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) pos_rank_sum += mid;
    }
    i = j;
  }
  const double np = static_cast<double>(res.n_pos);
  const double nn = static_cast<double>(res.n_neg);
  res.auc = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
  return res;
}

inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  return roc_auc(std::span<const double>(scores), std::span<const int>(labels));
}

enum class BagInference { max, mean };

inline std::string to_string(BagInference m) { return m == BagInference::max ? "max" : "mean"; }

inline BagInference parse_bag_inference(const std::string& s) {
  if (s == "max") return BagInference::max;
  if (s == "mean") return BagInference::mean;
  throw Error("unknown bag inference mode '" + s + "'");
}

inline double pool_scores(std::span<const double> instance_probs, BagInference mode) {
  if (instance_probs.empty()) throw Error("empty bag");
  if (mode == BagInference::max) {
    return *std::max_element(instance_probs.begin(), instance_probs.end());
  }
  double s = 0.0;
  for (double v : instance_probs) s += v;
  return s / static_cast<double>(instance_probs.size());
}

inline double bag_predict(const ClassifierParams& params, const Bag& bag, BagInference mode) {
  if (bag.instances.empty()) throw Error("empty bag");
  std::vector<double> probs;
  probs.reserve(bag.instances.size());
  for (const auto& inst : bag.instances) probs.push_back(positive_prob(params, inst.features));
  return pool_scores(probs, mode);
}

struct PseudoLabelQuality {
  double precision = 1.0;
  double accuracy = 0.0;
  // No positive predictions: precision is reported as 1.0 by convention.
  bool precision_undefined = false;
  double positive_fraction = 0.0;
};

inline PseudoLabelQuality pseudo_label_metrics(const PseudoLabelMatrix& q,
                                               std::span<const int> truth) {
  if (truth.size() != q.rows()) throw Error("pseudo_label_metrics: length mismatch");
  std::size_t tp = 0, fp = 0, correct = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const bool pred = q.labels(i, kPositive) >= q.labels(i, kNegative);
    const bool actual = truth[i] != 0;
    if (pred && actual) ++tp;
    if (pred && !actual) ++fp;
    if (pred == actual) ++correct;
  }
  PseudoLabelQuality m;
  if (q.rows() == 0) return m;
  if (tp + fp == 0) {
    m.precision = 1.0;
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(q.rows());
  m.positive_fraction = static_cast<double>(tp + fp) / static_cast<double>(q.rows());
  return m;
}

// Instance-level scores and labels over every labeled instance of a dataset.
struct InstanceScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

inline InstanceScores instance_scores(const ClassifierParams& params, const Dataset& ds) {
  InstanceScores out;
  for (const auto& bag : ds.bags) {
    for (const auto& inst : bag.instances) {
      if (!inst.true_label) continue;
      out.scores.push_back(positive_prob(params, inst.features));
      out.labels.push_back(to_int(*inst.true_label));
    }
  }
  return out;
}

struct BagScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

inline BagScores bag_scores(const ClassifierParams& params, const Dataset& ds, BagInference mode) {
  BagScores out;
  for (const auto& bag : ds.bags) {
    out.scores.push_back(bag_predict(params, bag, mode));
    out.labels.push_back(to_int(bag.label));
  }
  return out;
}

inline double accuracy_at(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5) {
  if (scores.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) ok += ((scores[i] >= threshold) == (labels[i] != 0));
  return static_cast<double>(ok) / static_cast<double>(scores.size());
}

// AUC when both classes are present, NaN otherwise.
inline double auc_or_nan(const std::vector<double>& s, const std::vector<int>& l) {
  const auto pos = std::count(l.begin(), l.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(l.size())) return std::nan("");
  return roc_auc(s, l).auc;
}

struct ClassifierReport {
  double instance_auc = std::nan("");
  double bag_auc = std::nan("");
  double bag_accuracy = 0.0;
};

inline ClassifierReport evaluate(const ClassifierParams& params, const Dataset& ds,
                                 BagInference mode) {
  ClassifierReport r;
  const auto inst = instance_scores(params, ds);
  r.instance_auc = auc_or_nan(inst.scores, inst.labels);
  const auto bags = bag_scores(params, ds, mode);
  r.bag_auc = auc_or_nan(bags.scores, bags.labels);
  r.bag_accuracy = accuracy_at(bags.scores, bags.labels);
  return r;
}

// ---------------------------------------------------------------------------
// Label entropy of K i.i.d. instances vs. the aggregated bag label, in bits:
//   H_I = -K (p log p + (1-p) log(1-p))
//   H_B = -(p^K log p^K + (1-p^K) log(1-p^K))
// ---------------------------------------------------------------------------

struct EntropyPoint {
  std::size_t K = 1;
  double p = 0.0;
  double h_instance = 0.0;
  double h_bag = 0.0;
  double difference = 0.0;
};

// Binary entropy in bits, 0 log 0 = 0.
inline double binary_entropy_bits(double q) {
  auto term = [](double v) { return v > 0.0 ? -v * std::log2(v) : 0.0; };
  return term(q) + term(1.0 - q);
}

inline EntropyPoint entropy_point(std::size_t K, double p) {
  if (K < 1) throw Error("entropy: K must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("entropy: p must lie in [0, 1]");
  EntropyPoint e{K, p, 0.0, 0.0, 0.0};
  e.h_instance = static_cast<double>(K) * binary_entropy_bits(p);
  e.h_bag = binary_entropy_bits(std::pow(p, static_cast<double>(K)));
  e.difference = e.h_instance - e.h_bag;
  return e;
}

inline std::vector<EntropyPoint> entropy_curve(std::span<const std::size_t> ks,
                                               std::span<const double> ps) {
  std::vector<EntropyPoint> out;
  out.reserve(ks.size() * ps.size());
  for (auto k : ks) {
    for (double p : ps) out.push_back(entropy_point(k, p));
  }
  return out;
}

}  // namespace otmil
