// otmil: command-line driver for weakly-supervised self-training MIL.
//
//   otmil {gen|train|eval|sweep|ablation|baseline|entropy} [flags]
//
// Every subcommand takes --seed and --out DIR, echoes its flags to
// DIR/config.json, and leaves DIR/.failed behind on any error.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "otmil/otmil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace otmil;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out = "out";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
}

struct TrainFlags {
  double mu = 0.1;
  std::size_t warmup_T = 50;
  double lambda = 1.0;
  double lr = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t reassign_every = 1;
  std::string arch = "linear";
  std::size_t hidden = 128;
  bool no_soft = false;
  bool no_constrain = false;
  bool no_adaptive = false;
  std::string bag_inference = "max";
  std::string local_source = "Q";
  std::size_t sinkhorn_iters = 1000;
  double sinkhorn_tol = 1e-6;
  bool standardize = false;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--mu", f.mu, "Target positive fraction after warm-up")->capture_default_str();
  sub->add_option("--warmup-T", f.warmup_T, "Epochs of linear mu decay from 0.5")->capture_default_str();
  sub->add_option("--lambda", f.lambda, "Entropic sharpness of the transport assignment")
      ->capture_default_str();
  sub->add_option("--lr", f.lr, "SGD learning rate")->capture_default_str();
  sub->add_option("--batch-size", f.batch_size, "Instances per SGD batch")->capture_default_str();
  sub->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--reassign-every", f.reassign_every, "Epochs between pseudo-label updates")
      ->capture_default_str();
  sub->add_option("--arch", f.arch, "linear | mlp")->capture_default_str();
  sub->add_option("--hidden", f.hidden, "MLP hidden units")->capture_default_str();
  sub->add_flag("--no-soft", f.no_soft, "Binarize pseudo labels");
  sub->add_flag("--no-constrain", f.no_constrain, "Use raw predictions as pseudo labels");
  sub->add_flag("--no-adaptive", f.no_adaptive, "Hold mu constant");
  sub->add_option("--bag-inference", f.bag_inference, "max | mean")->capture_default_str();
  sub->add_option("--local-source", f.local_source, "Q | P: scores for the per-bag argmax")
      ->capture_default_str();
  sub->add_option("--sinkhorn-iters", f.sinkhorn_iters, "Max scaling iterations")->capture_default_str();
  sub->add_option("--sinkhorn-tol", f.sinkhorn_tol, "Marginal tolerance (fraction of N)")
      ->capture_default_str();
  sub->add_flag("--standardize", f.standardize, "z-score features with training statistics");
}

// Loads training data (and optional evaluation data), z-scored on the
// training statistics when requested.
struct Loaded {
  Dataset train;
  std::optional<Dataset> eval;
  std::optional<FeatureScaler> scaler;

  const Dataset* eval_ptr() const { return eval ? &*eval : nullptr; }
};

Loaded load_pair(const std::string& data, const std::string& test, bool standardize) {
  Loaded l{load_dataset(data), std::nullopt, std::nullopt};
  validate(l.train, true);
  if (!test.empty()) l.eval = load_dataset(test);
  if (standardize) {
    l.scaler = fit_scaler(l.train);
    apply_scaler(*l.scaler, l.train);
    if (l.eval) apply_scaler(*l.scaler, *l.eval);
  }
  return l;
}

TrainConfig to_config(const TrainFlags& f, std::uint64_t seed) {
  TrainConfig c;
  c.sgd.learning_rate = f.lr;
  c.sgd.batch_size = f.batch_size;
  c.sgd.epochs = f.epochs;
  c.sgd.seed = seed;
  c.sinkhorn.lambda = f.lambda;
  c.sinkhorn.max_iters = f.sinkhorn_iters;
  c.sinkhorn.marginal_tol = f.sinkhorn_tol;
  c.schedule = {f.mu, f.warmup_T};
  c.reassign_every = f.reassign_every;
  c.ablation = {!f.no_soft, !f.no_constrain, !f.no_adaptive};
  c.bag_inference = parse_bag_inference(f.bag_inference);
  if (f.local_source == "Q") {
    c.local_source = LocalSource::pseudo_labels;
  } else if (f.local_source == "P") {
    c.local_source = LocalSource::predictions;
  } else {
    throw Error("--local-source must be Q or P");
  }
  c.arch = parse_arch(f.arch);
  c.hidden = f.hidden;
  c.seed = seed;
  validate(c);
  return c;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed: " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json config_echo(const CLI::App* sub) {
  json j;
  j["subcommand"] = sub->get_name();
  for (const auto* opt : sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    auto name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    const auto& res = opt->results();
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
    } else if (res.size() > 1 || opt->get_expected_max() > 1) {
      j[name] = res;
    } else if (res.size() == 1) {
      j[name] = res.front();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

// "1..64" or "1,2,4"
std::vector<std::size_t> parse_count_list(const std::string& s) {
  std::vector<std::size_t> out;
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const auto lo = std::stoul(s.substr(0, dots));
    const auto hi = std::stoul(s.substr(dots + 2));
    if (lo > hi) throw Error("empty range " + s);
    for (auto k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  for (double v : parse_double_list(s)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

json dataset_manifest(const Dataset& ds) {
  return {{"bags", ds.bags.size()},
          {"positive_bags", ds.positive_bag_count()},
          {"instances", ds.instance_count()},
          {"feature_dim", ds.feature_dim}};
}

json report_json(const ClassifierReport& r) {
  return {{"instance_auc", json_number(r.instance_auc)},
          {"bag_auc", json_number(r.bag_auc)},
          {"bag_accuracy", r.bag_accuracy}};
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenFlags {
  std::string scheme = "normal";
  double ratio = 0.10;
  std::size_t bags = 200;
  std::size_t test_bags = 100;
  std::size_t bag_size = 100;
  std::size_t dim = 16;
  double separation = 4.0;
  double hard_scale = 1.0;
  double concept_a_prob = 0.5;
  double bag_fraction = 0.5;
  std::string mnist_images, mnist_labels, mnist_test_images, mnist_test_labels;
};

void cmd_gen(const GenFlags& f, const Common& c) {
  GenConfig g;
  if (f.scheme == "normal") {
    g.scheme = Scheme::normal;
    g.n_concepts = 1;
  } else if (f.scheme == "hard") {
    g.scheme = Scheme::hard;
    g.n_concepts = 2;
  } else {
    throw Error("--scheme must be normal or hard");
  }
  g.positive_ratio = f.ratio;
  g.n_bags = f.bags;
  g.test_bags = f.test_bags;
  g.bag_size = f.bag_size;
  g.feature_dim = f.dim;
  g.cluster_separation = f.separation;
  g.hard_concept_scale = f.hard_scale;
  g.concept_a_prob = f.concept_a_prob;
  g.positive_bag_fraction = f.bag_fraction;
  g.seed = c.seed;
  const auto a = positives_per_bag(g);

  std::vector<Dataset> out;
  Rng rng(c.seed);
  const bool mnist = !f.mnist_images.empty();
  if (mnist) {
    if (f.mnist_labels.empty()) throw Error("--mnist-labels is required with --mnist-images");
    const auto tr = load_idx_mnist(f.mnist_images, f.mnist_labels);
    std::optional<IdxImages> te;
    if (!f.mnist_test_images.empty()) te = load_idx_mnist(f.mnist_test_images, f.mnist_test_labels);
    const auto& test_pool = te ? *te : tr;
    using detail::PositiveMix;
    if (g.scheme == Scheme::normal) {
      out.push_back(mnist_normal_bags(tr.features, tr.digits, g, rng, "train"));
      out.push_back(mnist_normal_bags(test_pool.features, test_pool.digits, g, rng, "test"));
    } else {
      out.push_back(mnist_hard_bags(tr.features, tr.digits, g, rng, PositiveMix::mixed, "train"));
      out.push_back(mnist_hard_bags(test_pool.features, test_pool.digits, g, rng, PositiveMix::mixed,
                                    "test_normal"));
      out.push_back(mnist_hard_bags(test_pool.features, test_pool.digits, g, rng, PositiveMix::only_a,
                                    "test_pos0"));
      out.push_back(mnist_hard_bags(test_pool.features, test_pool.digits, g, rng, PositiveMix::only_b,
                                    "test_pos8"));
    }
  } else if (g.scheme == Scheme::normal) {
    out.push_back(generate_normal_bags(g, rng, "train"));
    auto test_cfg = g;
    test_cfg.n_bags = g.test_bags;
    out.push_back(generate_normal_bags(test_cfg, rng, "test"));
  } else {
    auto s = generate_hard_bags(g, rng);
    out = {std::move(s.train), std::move(s.test_normal), std::move(s.test_pos0), std::move(s.test_pos8)};
  }

  json files;
  for (const auto& ds : out) {
    save_ndjson(ds, (fs::path(c.out) / (ds.name + ".ndjson")).string());
    files[ds.name + ".ndjson"] = dataset_manifest(ds);
  }
  write_json(fs::path(c.out) / "manifest.json", {{"scheme", f.scheme},
                                                  {"source", mnist ? "mnist-idx" : "gaussian-blobs"},
                                                  {"ratio", f.ratio},
                                                  {"positives_per_bag", a},
                                                  {"bag_size", f.bag_size},
                                                  {"seed", c.seed},
                                                  {"files", files}});
}

// ---------------------------------------------------------------------------
// train / eval
// ---------------------------------------------------------------------------

void cmd_train(const std::string& data, const std::string& test, const TrainFlags& f, const Common& c) {
  const auto cfg = to_config(f, c.seed);
  const auto loaded = load_pair(data, test, f.standardize);

  const auto res = self_train(loaded.train, cfg, loaded.eval_ptr());
  auto checkpoint = to_json(res.params);
  if (loaded.scaler) checkpoint["scaler"] = {{"mean", loaded.scaler->mean}, {"scale", loaded.scaler->scale}};
  write_json(fs::path(c.out) / "checkpoint.json", checkpoint);
  std::ostringstream csv;
  write_run_csv(res.record, csv);
  write_text(fs::path(c.out) / "metrics.csv", csv.str());
  auto summary = summarize(res.record);
  summary["config"] = to_json(cfg);
  summary["seed"] = c.seed;
  summary["train_data"] = data;
  summary["eval_data"] = test.empty() ? data : test;
  write_json(fs::path(c.out) / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
}

void cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& mode,
              const Common& c) {
  std::ifstream in(checkpoint);
  if (!in) throw Error("cannot open checkpoint: " + checkpoint);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
  const auto params = classifier_from_json(j);
  auto ds = load_dataset(data);
  if (j.contains("scaler")) {
    try {
      apply_scaler({j["scaler"].at("mean").get<std::vector<double>>(),
                    j["scaler"].at("scale").get<std::vector<double>>()},
                   ds);
    } catch (const json::exception& e) {
      throw Error(std::string("checkpoint scaler: ") + e.what());
    }
  }
  const auto inference = parse_bag_inference(mode);
  const auto report = evaluate(params, ds, inference);

  std::ostringstream csv;
  csv << "bag_id,label,score\n";
  for (const auto& bag : ds.bags) {
    csv << bag.bag_id << ',' << to_int(bag.label) << ','
        << format_double(bag_predict(params, bag, inference)) << '\n';
  }
  write_text(fs::path(c.out) / "bag_scores.csv", csv.str());
  auto out = report_json(report);
  out["bags"] = ds.bags.size();
  out["bag_inference"] = mode;
  write_json(fs::path(c.out) / "eval.json", out);
  std::cout << out.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
  double mu = 0.0;
  std::size_t warmup_T = 0;
  double instance_auc = std::nan("");
  double bag_auc = std::nan("");
  double bag_accuracy = 0.0;
  double bag_accuracy_std = 0.0;
};

SweepPoint run_point(const Dataset& ds, const Dataset* eval, TrainConfig cfg, std::size_t kfold,
                     bool standardize) {
  SweepPoint pt{cfg.schedule.mu_final, cfg.schedule.warmup_T};
  if (kfold >= 2) {
    std::vector<double> accs, aucs;
    for (auto& fold : kfold_split(ds, kfold, cfg.seed)) {
      if (standardize) {
        const auto s = fit_scaler(fold.train);
        apply_scaler(s, fold.train);
        apply_scaler(s, fold.test);
      }
      const auto r = self_train(fold.train, cfg, &fold.test);
      const auto rep = evaluate(r.params, fold.test, cfg.bag_inference);
      accs.push_back(rep.bag_accuracy);
      if (!std::isnan(rep.bag_auc)) aucs.push_back(rep.bag_auc);
    }
    double m = 0.0, v = 0.0;
    for (double a : accs) m += a;
    m /= static_cast<double>(accs.size());
    for (double a : accs) v += (a - m) * (a - m);
    pt.bag_accuracy = m;
    pt.bag_accuracy_std = std::sqrt(v / static_cast<double>(accs.size()));
    if (!aucs.empty()) {
      double s = 0.0;
      for (double a : aucs) s += a;
      pt.bag_auc = s / static_cast<double>(aucs.size());
    }
    return pt;
  }
  const auto r = self_train(ds, cfg, eval);
  const auto rep = evaluate(r.params, eval ? *eval : ds, cfg.bag_inference);
  pt.instance_auc = rep.instance_auc;
  pt.bag_auc = rep.bag_auc;
  pt.bag_accuracy = rep.bag_accuracy;
  return pt;
}

void cmd_sweep(const std::string& data, const std::string& test, const std::string& mu_grid,
               const std::string& t_grid, std::size_t kfold, std::size_t jobs, const TrainFlags& f,
               const Common& c) {
  const auto base = to_config(f, c.seed);
  const auto mus = parse_double_list(mu_grid);
  std::vector<std::size_t> ts;
  for (double t : parse_double_list(t_grid)) ts.push_back(static_cast<std::size_t>(t));
  if (ts.empty()) ts.push_back(base.schedule.warmup_T);
  if (mus.empty()) throw Error("empty grid");

  // k-fold standardizes inside each fold instead.
  const auto loaded = load_pair(data, test, f.standardize && kfold < 2);

  std::vector<TrainConfig> grid;
  for (double mu : mus) {
    for (auto t : ts) {
      auto cfg = base;
      cfg.schedule = {mu, t};
      validate(cfg);
      grid.push_back(cfg);
    }
  }

  std::vector<SweepPoint> results(grid.size());
  std::vector<std::string> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < grid.size();) {
      try {
        results[i] = run_point(loaded.train, loaded.eval_ptr(), grid[i], kfold, f.standardize);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(jobs, grid.size())); ++w) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (!e.empty()) throw Error("sweep point failed: " + e);
  }

  // Best: instance AUC when known, else bag AUC, else bag accuracy. First wins ties.
  auto key = [&](const SweepPoint& p) {
    if (!std::isnan(p.instance_auc)) return p.instance_auc;
    if (kfold < 2 && !std::isnan(p.bag_auc)) return p.bag_auc;
    return p.bag_accuracy;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (key(results[i]) > key(results[best])) best = i;
  }

  std::ostringstream csv;
  csv << "mu,warmup_T,seed,instance_auc,bag_auc,bag_accuracy,bag_accuracy_std,best\n";
  json rows = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& p = results[i];
    csv << format_double(p.mu) << ',' << p.warmup_T << ',' << c.seed << ','
        << format_double(p.instance_auc) << ',' << format_double(p.bag_auc) << ','
        << format_double(p.bag_accuracy) << ',' << format_double(p.bag_accuracy_std) << ','
        << (i == best ? 1 : 0) << '\n';
    rows.push_back({{"mu", p.mu},
                    {"warmup_T", p.warmup_T},
                    {"instance_auc", json_number(p.instance_auc)},
                    {"bag_auc", json_number(p.bag_auc)},
                    {"bag_accuracy", p.bag_accuracy},
                    {"bag_accuracy_std", p.bag_accuracy_std}});
  }
  write_text(fs::path(c.out) / "sweep.csv", csv.str());
  json summary{{"rows", rows}, {"best", rows[best]}, {"best_index", best}, {"seed", c.seed},
               {"kfold", kfold}};
  write_json(fs::path(c.out) / "summary.json", summary);
  std::cout << csv.str();
}

// ---------------------------------------------------------------------------
// ablation / baseline / entropy
// ---------------------------------------------------------------------------

void cmd_ablation(const std::string& data, const std::string& test, const TrainFlags& f,
                  const Common& c) {
  const auto cfg = to_config(f, c.seed);
  const auto loaded = load_pair(data, test, f.standardize);
  const auto rows = run_ablation_suite(loaded.train, cfg, loaded.eval_ptr());

  std::ostringstream csv;
  csv << "soft_labels,constrain,adaptive_mu,instance_auc,bag_auc,positive_pseudo_fraction\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv << r.flags.soft_labels << ',' << r.flags.constrain << ',' << r.flags.adaptive_mu << ','
        << format_double(r.instance_auc) << ',' << format_double(r.bag_auc) << ','
        << format_double(r.positive_fraction) << '\n';
    std::ostringstream per_run;
    write_run_csv(r.record, per_run);
    write_text(fs::path(c.out) / ("metrics_row" + std::to_string(i + 1) + ".csv"), per_run.str());
  }
  write_text(fs::path(c.out) / "ablation.csv", csv.str());
  std::cout << csv.str();
}

void cmd_baseline(const std::string& kind, const std::string& data, const std::vector<std::string>& tests,
                  double lr, std::size_t epochs, std::size_t batch, const std::string& arch,
                  std::size_t hidden, std::size_t attention_hidden, const Common& c) {
  const auto ds = load_dataset(data);
  SgdConfig sgd{lr, batch, epochs, c.seed};
  BaselineConfig bc{parse_arch(arch), hidden, attention_hidden};
  const auto trained = pool_baseline_train(ds, parse_pool_kind(kind), sgd, bc);

  std::ostringstream csv;
  csv << "split,instance_auc,bag_auc,bag_accuracy\n";
  json splits;
  std::vector<std::pair<std::string, Dataset>> evals;
  if (tests.empty()) {
    evals.emplace_back(ds.name, ds);
  } else {
    for (const auto& t : tests) {
      auto d = load_dataset(t);
      evals.emplace_back(d.name, std::move(d));
    }
  }
  for (const auto& [name, d] : evals) {
    const auto rep = evaluate_baseline(trained.model, d);
    csv << name << ',' << format_double(rep.instance_auc) << ',' << format_double(rep.bag_auc) << ','
        << format_double(rep.bag_accuracy) << '\n';
    splits[name] = report_json(rep);
  }
  write_text(fs::path(c.out) / "baseline.csv", csv.str());
  write_json(fs::path(c.out) / "baseline.json",
             {{"kind", kind}, {"seed", c.seed}, {"final_train_loss", trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back()}, {"splits", splits}});
  std::cout << csv.str();
}

void cmd_entropy(const std::string& k_spec, std::size_t p_steps, const Common& c) {
  const auto ks = parse_count_list(k_spec);
  if (p_steps == 0) throw Error("--p-steps must be >= 1");
  std::vector<double> ps;
  for (std::size_t i = 1; i <= p_steps; ++i) {
    ps.push_back(static_cast<double>(i) / static_cast<double>(p_steps + 1));
  }
  std::ostringstream csv;
  csv << "K,p,h_instance,h_bag,difference\n";
  for (const auto& e : entropy_curve(ks, ps)) {
    csv << e.K << ',' << format_double(e.p) << ',' << format_double(e.h_instance) << ','
        << format_double(e.h_bag) << ',' << format_double(e.difference) << '\n';
  }
  write_text(fs::path(c.out) / "entropy.csv", csv.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised self-training for multiple instance learning"};
  app.require_subcommand(1);

  Common common;

  GenFlags gen;
  auto* s_gen = app.add_subcommand("gen", "Generate synthetic bag datasets");
  add_common(s_gen, common);
  s_gen->add_option("--scheme", gen.scheme, "normal | hard")->capture_default_str();
  s_gen->add_option("--ratio", gen.ratio, "Positive instance ratio in positive bags")->capture_default_str();
  s_gen->add_option("--bags", gen.bags, "Training bags")->capture_default_str();
  s_gen->add_option("--test-bags", gen.test_bags, "Bags per test split")->capture_default_str();
  s_gen->add_option("--bag-size", gen.bag_size, "Instances per bag")->capture_default_str();
  s_gen->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
  s_gen->add_option("--separation", gen.separation, "Cluster separation")->capture_default_str();
  s_gen->add_option("--hard-scale", gen.hard_scale, "Concept B separation multiplier")->capture_default_str();
  s_gen->add_option("--concept-a-prob", gen.concept_a_prob, "P(concept A) per positive (hard)")
      ->capture_default_str();
  s_gen->add_option("--bag-fraction", gen.bag_fraction, "Fraction of positive bags")->capture_default_str();
  s_gen->add_option("--mnist-images", gen.mnist_images, "IDX training images (optional)");
  s_gen->add_option("--mnist-labels", gen.mnist_labels, "IDX training labels");
  s_gen->add_option("--mnist-test-images", gen.mnist_test_images, "IDX test images");
  s_gen->add_option("--mnist-test-labels", gen.mnist_test_labels, "IDX test labels");

  TrainFlags train_flags;
  std::string data, test, checkpoint, bag_mode = "max";
  auto* s_train = app.add_subcommand("train", "Self-train an instance classifier");
  add_common(s_train, common);
  add_train_flags(s_train, train_flags);
  s_train->add_option("--data", data, "Training dataset (.ndjson or .csv)")->required();
  s_train->add_option("--test", test, "Evaluation dataset");

  auto* s_eval = app.add_subcommand("eval", "Score a checkpoint against a dataset");
  add_common(s_eval, common);
  s_eval->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
  s_eval->add_option("--data", data, "Dataset")->required();
  s_eval->add_option("--bag-inference", bag_mode, "max | mean")->capture_default_str();

  std::string mu_grid = "0.1,0.15,0.2,0.25", t_grid;
  std::size_t kfold = 0, jobs = 1;
  auto* s_sweep = app.add_subcommand("sweep", "Grid search over mu and T");
  add_common(s_sweep, common);
  add_train_flags(s_sweep, train_flags);
  s_sweep->add_option("--data", data, "Training dataset")->required();
  s_sweep->add_option("--test", test, "Evaluation dataset");
  s_sweep->add_option("--mu-grid", mu_grid, "Comma-separated mu values")->capture_default_str();
  s_sweep->add_option("--T-grid", t_grid, "Comma-separated warm-up lengths");
  s_sweep->add_option("--kfold", kfold, "k-fold cross-validation on --data (0 = off)")->capture_default_str();
  s_sweep->add_option("--jobs", jobs, "Worker threads")->capture_default_str();

  auto* s_ablation = app.add_subcommand("ablation", "Run the four-configuration ablation");
  add_common(s_ablation, common);
  add_train_flags(s_ablation, train_flags);
  s_ablation->add_option("--data", data, "Training dataset")->required();
  s_ablation->add_option("--test", test, "Evaluation dataset");

  std::string kind = "attention", b_arch = "linear";
  std::vector<std::string> tests;
  double b_lr = 0.01;
  std::size_t b_epochs = 20, b_batch = 1, b_hidden = 128, b_att = 64;
  auto* s_base = app.add_subcommand("baseline", "Train and evaluate a bag-classification baseline");
  add_common(s_base, common);
  s_base->add_option("--kind", kind, "max | mean | attention")->capture_default_str();
  s_base->add_option("--data", data, "Training dataset")->required();
  s_base->add_option("--test", tests, "Evaluation datasets (repeatable)");
  s_base->add_option("--lr", b_lr, "SGD learning rate")->capture_default_str();
  s_base->add_option("--epochs", b_epochs, "Epochs")->capture_default_str();
  s_base->add_option("--batch-size", b_batch, "Bags per SGD batch")->capture_default_str();
  s_base->add_option("--arch", b_arch, "Instance classifier for max/mean")->capture_default_str();
  s_base->add_option("--hidden", b_hidden, "MLP hidden units")->capture_default_str();
  s_base->add_option("--attention-hidden", b_att, "Attention hidden size L")->capture_default_str();

  std::string k_spec = "1..64";
  std::size_t p_steps = 99;
  auto* s_entropy = app.add_subcommand("entropy", "Instance vs bag label entropy table");
  add_common(s_entropy, common);
  s_entropy->add_option("--K", k_spec, "Range a..b or list")->capture_default_str();
  s_entropy->add_option("--p-steps", p_steps, "Interior grid points of p")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  const fs::path out_dir(common.out);
  try {
    fs::create_directories(out_dir);
    fs::remove(out_dir / ".failed");
    write_json(out_dir / "config.json", config_echo(sub));

    if (sub == s_gen) {
      cmd_gen(gen, common);
    } else if (sub == s_train) {
      cmd_train(data, test, train_flags, common);
    } else if (sub == s_eval) {
      cmd_eval(checkpoint, data, bag_mode, common);
    } else if (sub == s_sweep) {
      cmd_sweep(data, test, mu_grid, t_grid, kfold, jobs, train_flags, common);
    } else if (sub == s_ablation) {
      cmd_ablation(data, test, train_flags, common);
    } else if (sub == s_base) {
      cmd_baseline(kind, data, tests, b_lr, b_epochs, b_batch, b_arch, b_hidden, b_att, common);
    } else if (sub == s_entropy) {
      cmd_entropy(k_spec, p_steps, common);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::error_code ec;
    if (fs::is_directory(out_dir, ec)) {
      std::ofstream(out_dir / ".failed") << e.what() << "\n";
    }
    return 1;
  }
  return 0;
}
