#pragma once

// Weakly-supervised self-training. Each epoch alternates
//   (1) pseudo-label assignment over all positive-bag instances from the
//       current classifier (global transport constraint + local per-bag
//       constraint), and
//   (2) SGD over shuffled mixed batches of negative-bag instances (true
//       negative targets) and positive-bag instances (pseudo-label targets).

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otmil/data.hpp"
#include "otmil/eval.hpp"
#include "otmil/labeling.hpp"
#include "otmil/model.hpp"

namespace otmil {

struct Ablation {
  bool soft_labels = true;
  bool constrain = true;
  bool adaptive_mu = true;
};

struct TrainConfig {
  SgdConfig sgd;
  SinkhornConfig sinkhorn;
  MuSchedule schedule;
  std::size_t reassign_every = 1;
  Ablation ablation;
  BagInference bag_inference = BagInference::max;
  LocalSource local_source = LocalSource::pseudo_labels;
  Arch arch = Arch::linear;
  std::size_t hidden = 128;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  validate(c.sgd);
  validate(c.sinkhorn);
  validate(c.schedule);
  if (c.reassign_every < 1) throw Error("reassign_every must be >= 1");
}

struct EpochRow {
  std::size_t epoch = 0;
  double mu_t = 0.5;
  double loss = 0.0;
  double pseudo_precision = std::nan("");
  double pseudo_accuracy = std::nan("");
  double instance_auc = std::nan("");
  double bag_auc = std::nan("");
  bool converged = true;
  // Not part of the CSV: fraction of positive-bag instances whose pseudo
  // label argmax is positive, and their mean positive mass.
  double positive_fraction = 0.0;
  double positive_mass = 0.0;
  std::size_t sinkhorn_iterations = 0;
};

struct RunRecord {
  std::vector<EpochRow> rows;
};

struct TrainResult {
  ClassifierParams params;
  RunRecord record;
  PseudoLabelMatrix last_assignment;
};

// Flat index over a dataset's instances. Positive-bag instances are numbered
// in bag order; that numbering is the row order of P and Q.
struct InstanceRef {
  std::span<const double> features;
  bool in_positive_bag = false;
  std::size_t q_row = 0;
};

struct TrainingView {
  std::vector<InstanceRef> instances;
  std::vector<std::size_t> pos_rows;      // instance index of each Q row
  std::vector<std::size_t> bag_of_row;    // positive-bag ordinal of each Q row
  std::vector<std::size_t> positive_bags; // 0..n_positive_bags-1
  std::vector<int> pos_truth;             // ground truth per Q row, when known
  bool truth_known = true;
};

inline TrainingView make_view(const Dataset& ds) {
  TrainingView v;
  std::size_t ordinal = 0;
  for (const auto& bag : ds.bags) {
    for (const auto& inst : bag.instances) {
      InstanceRef ref{inst.features, bag.positive(), 0};
      if (bag.positive()) {
        ref.q_row = v.pos_rows.size();
        v.pos_rows.push_back(v.instances.size());
        v.bag_of_row.push_back(ordinal);
        if (inst.true_label) {
          v.pos_truth.push_back(to_int(*inst.true_label));
        } else {
          v.truth_known = false;
          v.pos_truth.push_back(0);
        }
      }
      v.instances.push_back(ref);
    }
    if (bag.positive()) v.positive_bags.push_back(ordinal++);
  }
  return v;
}

inline PredictionMatrix predict_positive_bags(const ClassifierParams& params, const TrainingView& v) {
  PredictionMatrix p{Matrix(v.pos_rows.size(), 2), v.bag_of_row};
  for (std::size_t r = 0; r < v.pos_rows.size(); ++r) {
    const auto pr = forward(params, v.instances[v.pos_rows[r]].features);
    p.probs(r, kPositive) = pr[0];
    p.probs(r, kNegative) = pr[1];
  }
  return p;
}

// One epoch of batches: a shuffled partition of every instance. Negative-bag
// instances target [0, 1]; positive-bag instances target their Q row.
inline std::vector<std::vector<Example>> mixed_batches(const TrainingView& v,
                                                       const PseudoLabelMatrix& q,
                                                       std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (q.rows() != v.pos_rows.size()) throw Error("pseudo labels do not cover positive-bag instances");
  std::vector<std::size_t> order(v.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<Example>> batches;
  batches.reserve((order.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Example> b;
    b.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto& ref = v.instances[order[i]];
      ProbPair t{0.0, 1.0};
      if (ref.in_positive_bag) t = {q.labels(ref.q_row, kPositive), q.labels(ref.q_row, kNegative)};
      b.push_back({ref.features, t});
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

struct Assignment {
  PseudoLabelMatrix q;
  bool converged = true;
  std::size_t iterations = 0;
};

inline Assignment assign_pseudo_labels(const PredictionMatrix& p, const TrainingView& v, double mu,
                                       const TrainConfig& cfg) {
  Assignment a;
  if (cfg.ablation.constrain) {
    auto res = sinkhorn_assign(p, mu, cfg.sinkhorn);
    a.converged = res.converged;
    a.iterations = res.iterations;
    a.q = apply_local_constraint(std::move(res.q), v.positive_bags, cfg.local_source, p);
  } else {
    a.q = naive_assign(p, cfg.ablation.soft_labels ? NaiveMode::soft : NaiveMode::hard);
  }
  if (!cfg.ablation.soft_labels) a.q = binarize(std::move(a.q));
  return a;
}

// `eval` (optional) supplies the instance/bag AUC columns; otherwise the
// training set is scored.
inline TrainResult self_train(const Dataset& ds, const TrainConfig& cfg,
                              const Dataset* eval = nullptr) {
  validate(cfg);
  validate(ds);
  if (ds.positive_bag_count() == 0) throw Error("dataset has no positive bags");
  if (ds.negative_bag_count() == 0) throw Error("dataset has no negative bags");

  const auto view = make_view(ds);
  Rng init_rng(derive_seed(cfg.seed, 0));
  Rng batch_rng(derive_seed(cfg.seed, 1));
  TrainResult res{init_classifier(cfg.arch, ds.feature_dim, cfg.hidden, init_rng), {}, {}};
  const Dataset& scored = eval ? *eval : ds;

  Assignment current;
  for (std::size_t t = 0; t < cfg.sgd.epochs; ++t) {
    EpochRow row;
    row.epoch = t;
    row.mu_t = cfg.ablation.adaptive_mu ? adaptive_mu(t, cfg.schedule) : cfg.schedule.mu_final;

    if (t % cfg.reassign_every == 0) {
      const auto p = predict_positive_bags(res.params, view);
      current = assign_pseudo_labels(p, view, row.mu_t, cfg);
    }
    row.converged = current.converged;
    row.sinkhorn_iterations = current.iterations;
    const auto quality = pseudo_label_metrics(current.q, view.pos_truth);
    row.positive_fraction = quality.positive_fraction;
    double mass = 0.0;
    for (std::size_t i = 0; i < current.q.rows(); ++i) mass += current.q.positive(i);
    row.positive_mass = current.q.rows() ? mass / static_cast<double>(current.q.rows()) : 0.0;
    if (view.truth_known) {
      row.pseudo_precision = quality.precision;
      row.pseudo_accuracy = quality.accuracy;
    }

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : mixed_batches(view, current.q, cfg.sgd.batch_size, batch_rng)) {
      double batch_loss = 0.0;
      const auto g = backward(res.params, batch, &batch_loss);
      sgd_step(res.params, g, cfg.sgd.learning_rate);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    row.loss = loss_sum / static_cast<double>(seen);

    const auto report = evaluate(res.params, scored, cfg.bag_inference);
    row.instance_auc = report.instance_auc;
    row.bag_auc = report.bag_auc;
    res.record.rows.push_back(row);
  }
  res.last_assignment = current.q;
  return res;
}

// ---------------------------------------------------------------------------
// Ablation suite: the four cumulative switch settings, in order
//   (-, -, -), (soft, -, -), (soft, constrain, -), (soft, constrain, adaptive).
// Without the adaptive schedule mu is held at schedule.mu_final.
// ---------------------------------------------------------------------------

struct AblationRow {
  Ablation flags;
  double instance_auc = std::nan("");
  double bag_auc = std::nan("");
  double positive_fraction = 0.0;
  RunRecord record;
};

inline std::vector<Ablation> ablation_settings() {
  return {{false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
}

inline std::vector<AblationRow> run_ablation_suite(const Dataset& ds, const TrainConfig& base,
                                                   const Dataset* eval = nullptr) {
  std::vector<AblationRow> rows;
  for (const auto& flags : ablation_settings()) {
    auto cfg = base;
    cfg.ablation = flags;
    auto r = self_train(ds, cfg, eval);
    AblationRow row{flags, std::nan(""), std::nan(""), 0.0, std::move(r.record)};
    if (!row.record.rows.empty()) {
      const auto& last = row.record.rows.back();
      row.instance_auc = last.instance_auc;
      row.bag_auc = last.bag_auc;
      row.positive_fraction = last.positive_fraction;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

// Shortest round-trip decimal; "nan" for NaN.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_run_csv(const RunRecord& rec, std::ostream& out) {
  out << "epoch,mu_t,loss,pseudo_precision,pseudo_accuracy,instance_auc,bag_auc,converged\n";
  for (const auto& r : rec.rows) {
    out << r.epoch << ',' << format_double(r.mu_t) << ',' << format_double(r.loss) << ','
        << format_double(r.pseudo_precision) << ',' << format_double(r.pseudo_accuracy) << ','
        << format_double(r.instance_auc) << ',' << format_double(r.bag_auc) << ','
        << (r.converged ? 1 : 0) << '\n';
  }
}

// JSON has no NaN; missing metrics become null.
inline nlohmann::json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"arch", to_string(c.arch)},
          {"hidden", c.hidden},
          {"lr", c.sgd.learning_rate},
          {"batch_size", c.sgd.batch_size},
          {"epochs", c.sgd.epochs},
          {"lambda", c.sinkhorn.lambda},
          {"sinkhorn_max_iters", c.sinkhorn.max_iters},
          {"sinkhorn_tol", c.sinkhorn.marginal_tol},
          {"prob_floor", c.sinkhorn.prob_floor},
          {"mu", c.schedule.mu_final},
          {"warmup_T", c.schedule.warmup_T},
          {"reassign_every", c.reassign_every},
          {"soft_labels", c.ablation.soft_labels},
          {"constrain", c.ablation.constrain},
          {"adaptive_mu", c.ablation.adaptive_mu},
          {"bag_inference", to_string(c.bag_inference)},
          {"local_source", c.local_source == LocalSource::pseudo_labels ? "Q" : "P"}};
}

inline nlohmann::json summarize(const RunRecord& rec) {
  nlohmann::json s;
  if (rec.rows.empty()) return s;
  const auto& last = rec.rows.back();
  std::size_t unconverged = 0;
  for (const auto& r : rec.rows) unconverged += r.converged ? 0 : 1;
  s["epochs"] = rec.rows.size();
  s["final_mu_t"] = last.mu_t;
  s["final_loss"] = json_number(last.loss);
  s["instance_auc"] = json_number(last.instance_auc);
  s["bag_auc"] = json_number(last.bag_auc);
  s["pseudo_precision"] = json_number(last.pseudo_precision);
  s["pseudo_accuracy"] = json_number(last.pseudo_accuracy);
  s["positive_pseudo_fraction"] = last.positive_fraction;
  s["degenerate"] = last.positive_fraction < 0.01;
  s["sinkhorn_unconverged_epochs"] = unconverged;
  return s;
}

}  // namespace otmil
