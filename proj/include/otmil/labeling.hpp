#pragma once

// Constrained pseudo-label assignment for positive-bag instances.
//
// Rows are instances, columns are classes with the positive class first.
// The global constraint fixes the class column sums to r = [mu*N, (1-mu)*N]
// and every instance row to sum to one. The entropically regularized
// transport problem
//
//     min_{Q in U(r, 1)}  <Q, -log P> + (1/lambda) KL(Q || r 1^T)
//
// has the scaling solution Q = diag(a) P^lambda diag(b), found by alternating
// row/column normalization carried out entirely in the log domain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "otmil/numkit.hpp"

namespace otmil {

inline constexpr std::size_t kPositive = 0;
inline constexpr std::size_t kNegative = 1;

// N x 2 class probabilities over positive-bag instances, with the ordinal of
// the bag each row came from.
struct PredictionMatrix {
  Matrix probs;
  std::vector<std::size_t> bag_index;

  std::size_t rows() const noexcept { return probs.rows(); }
};

struct PseudoLabelMatrix {
  Matrix labels;
  std::vector<std::size_t> bag_index;

  std::size_t rows() const noexcept { return labels.rows(); }
  double positive(std::size_t i) const noexcept { return labels(i, kPositive); }
};

inline void validate(const PredictionMatrix& p, double tol = 1e-9) {
  if (p.probs.cols() != 2) throw Error("prediction matrix must have 2 columns");
  if (p.bag_index.size() != p.probs.rows()) throw Error("bag_index length != rows");
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double a = p.probs(i, 0), b = p.probs(i, 1);
    if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0) || std::abs(a + b - 1.0) > tol) {
      throw Error("prediction row " + std::to_string(i) + " is not a probability pair");
    }
  }
}

struct SinkhornConfig {
  double lambda = 1.0;
  std::size_t max_iters = 1000;
  double marginal_tol = 1e-6;
  double prob_floor = 1e-8;
  // Record the dual potential after every iteration.
  bool record_objective = false;
};

inline void validate(const SinkhornConfig& cfg) {
  if (!(cfg.lambda > 0.0)) throw Error("sinkhorn: lambda must be > 0");
  if (!(cfg.marginal_tol > 0.0)) throw Error("sinkhorn: marginal_tol must be > 0");
  if (!(cfg.prob_floor > 0.0 && cfg.prob_floor < 1e-3)) {
    throw Error("sinkhorn: prob_floor must lie in (0, 1e-3)");
  }
  if (cfg.max_iters == 0) throw Error("sinkhorn: max_iters must be >= 1");
}

struct SinkhornResult {
  PseudoLabelMatrix q;
  bool converged = false;
  std::size_t iterations = 0;
  // max_y |colsum_y - r_y| / N at the returned iterate; rows are exact.
  double marginal_violation = 0.0;
  // Dual potential Psi(a, b) after each iteration. Sinkhorn is exact block
  // coordinate descent on Psi, so the trace is non-increasing, and at
  // convergence -Psi equals the regularized primal optimum.
  std::vector<double> objective_trace;
};

inline double clamp_prob(double p, double floor) noexcept {
  return std::clamp(p, floor, 1.0 - floor);
}

// <Q, -log P> with P clamped to [floor, 1 - floor].
inline double transport_cost(const Matrix& q, const Matrix& p, double floor = 1e-8) {
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    acc -= q.data()[i] * std::log(clamp_prob(p.data()[i], floor));
  }
  return acc;
}

// <Q, -log P> + (1/lambda) * sum Q log(Q / r_y), with 0 log 0 = 0.
inline double regularized_objective(const Matrix& q, const Matrix& p, double mu, double lambda,
                                    double floor = 1e-8) {
  const double n = static_cast<double>(q.rows());
  const double r[2] = {mu * n, (1.0 - mu) * n};
  double kl = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t y = 0; y < 2; ++y) {
      const double v = q(i, y);
      if (v > 0.0) kl += v * std::log(v / r[y]);
    }
  }
  return transport_cost(q, p, floor) + kl / lambda;
}

inline SinkhornResult sinkhorn_assign(const PredictionMatrix& p, double mu,
                                      const SinkhornConfig& cfg = {}) {
  validate(cfg);
  validate(p);
  if (!(mu > 0.0 && mu < 1.0)) throw Error("sinkhorn: mu must lie in (0, 1)");
  const std::size_t n = p.rows();
  const double nd = static_cast<double>(n);
  if (mu * nd < 1.0 || (1.0 - mu) * nd < 1.0) throw Error("marginal below one instance");

  const double eps = 1.0 / cfg.lambda;
  const double r[2] = {mu * nd, (1.0 - mu) * nd};
  const double log_r[2] = {std::log(r[0]), std::log(r[1])};

  // log kernel: lambda * log P
  std::vector<double> log_k(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < 2; ++y) {
      log_k[2 * i + y] = cfg.lambda * std::log(clamp_prob(p.probs(i, y), cfg.prob_floor));
    }
  }

  std::vector<double> log_a(n, 0.0);
  double log_b[2] = {0.0, 0.0};
  std::vector<double> column(n);

  SinkhornResult res;
  res.q.bag_index = p.bag_index;
  double best_violation = std::numeric_limits<double>::infinity();
  std::vector<double> best_log_a;
  double best_log_b[2] = {0.0, 0.0};

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    // Column scaling: class masses to r.
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t i = 0; i < n; ++i) column[i] = log_k[2 * i + y] + log_a[i];
      log_b[y] = log_r[y] - log_sum_exp(column);
    }
    // Row scaling: each instance row to one.
    for (std::size_t i = 0; i < n; ++i) {
      const double pair[2] = {log_k[2 * i] + log_b[0], log_k[2 * i + 1] + log_b[1]};
      log_a[i] = -log_sum_exp(pair);
    }

    double colsum[2] = {0.0, 0.0};
    double sum_log_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      colsum[0] += std::exp(log_k[2 * i] + log_a[i] + log_b[0]);
      colsum[1] += std::exp(log_k[2 * i + 1] + log_a[i] + log_b[1]);
      sum_log_a += log_a[i];
    }
    const double violation =
        std::max(std::abs(colsum[0] - r[0]), std::abs(colsum[1] - r[1])) / nd;

    if (cfg.record_objective) {
      // Psi = eps * (sum Q - sum_i log a_i - sum_y r_y (log b_y - log r_y + 1)),
      // with sum Q = N after the row step.
      double psi = nd - sum_log_a;
      for (std::size_t y = 0; y < 2; ++y) psi -= r[y] * (log_b[y] - log_r[y] + 1.0);
      res.objective_trace.push_back(eps * psi);
    }

    res.iterations = it;
    if (violation < best_violation) {
      best_violation = violation;
      best_log_a = log_a;
      best_log_b[0] = log_b[0];
      best_log_b[1] = log_b[1];
    }
    if (violation < cfg.marginal_tol) {
      res.converged = true;
      break;
    }
  }

  res.marginal_violation = best_violation;
  res.q.labels = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double l0 = log_k[2 * i] + best_log_a[i] + best_log_b[0];
    const double l1 = log_k[2 * i + 1] + best_log_a[i] + best_log_b[1];
    // Renormalize in the log domain so rows sum to one to rounding.
    const double pair[2] = {l0, l1};
    const double lse = log_sum_exp(pair);
    res.q.labels(i, 0) = std::exp(l0 - lse);
    res.q.labels(i, 1) = std::exp(l1 - lse);
  }
  return res;
}

// Source scores for the per-bag argmax of the local constraint.
enum class LocalSource { pseudo_labels, predictions };

// For every bag ordinal in `positive_bags`, sets the row with the largest
// positive entry (lowest row index on ties) to exactly [1, 0]. When
// `predictions` is given, the argmax is taken over P instead of Q.
inline PseudoLabelMatrix apply_local_constraint(PseudoLabelMatrix q,
                                                std::span<const std::size_t> positive_bags,
                                                const PredictionMatrix* predictions = nullptr) {
  if (predictions && predictions->rows() != q.rows()) {
    throw Error("local constraint: prediction/pseudo-label row mismatch");
  }
  std::size_t max_bag = 0;
  for (auto b : positive_bags) max_bag = std::max(max_bag, b + 1);
  for (auto b : q.bag_index) max_bag = std::max(max_bag, b + 1);

  constexpr auto npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> best(max_bag, npos);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto b = q.bag_index[i];
    const double s = predictions ? predictions->probs(i, kPositive) : q.labels(i, kPositive);
    const double cur = best[b] == npos ? -1.0
                       : predictions   ? predictions->probs(best[b], kPositive)
                                       : q.labels(best[b], kPositive);
    if (best[b] == npos || s > cur) best[b] = i;
  }
  for (auto b : positive_bags) {
    if (best[b] == npos) throw Error("empty bag in assignment");
    q.labels(best[b], kPositive) = 1.0;
    q.labels(best[b], kNegative) = 0.0;
  }
  return q;
}

inline PseudoLabelMatrix apply_local_constraint(PseudoLabelMatrix q,
                                                std::span<const std::size_t> positive_bags,
                                                LocalSource source, const PredictionMatrix& p) {
  return apply_local_constraint(std::move(q), positive_bags,
                                source == LocalSource::predictions ? &p : nullptr);
}

// Row argmax to one-hot; the positive column wins ties.
inline PseudoLabelMatrix binarize(PseudoLabelMatrix q) {
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const bool pos = q.labels(i, kPositive) >= q.labels(i, kNegative);
    q.labels(i, kPositive) = pos ? 1.0 : 0.0;
    q.labels(i, kNegative) = pos ? 0.0 : 1.0;
  }
  return q;
}

enum class NaiveMode { soft, hard };

// Unconstrained self-training: pseudo labels are the raw predictions.
inline PseudoLabelMatrix naive_assign(const PredictionMatrix& p, NaiveMode mode) {
  validate(p);
  PseudoLabelMatrix q{p.probs, p.bag_index};
  return mode == NaiveMode::hard ? binarize(std::move(q)) : q;
}

struct MuSchedule {
  double mu_final = 0.1;
  std::size_t warmup_T = 0;
};

inline void validate(const MuSchedule& s) {
  if (!(s.mu_final > 0.0 && s.mu_final <= 0.5)) throw Error("mu must lie in (0, 0.5]");
}

// Linear decay from 0.5 at t = 0 to mu_final at t = T, constant afterwards.
inline double adaptive_mu(std::size_t t, const MuSchedule& s) {
  if (t >= s.warmup_T) return s.mu_final;
  return 0.5 + (s.mu_final - 0.5) / static_cast<double>(s.warmup_T) * static_cast<double>(t);
}

}  // namespace otmil
