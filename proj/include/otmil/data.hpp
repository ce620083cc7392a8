#pragma once

// Bags, datasets, synthetic bag generators, and file ingestion (NDJSON bags,
// CSV benchmark features, MNIST IDX).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "otmil/numkit.hpp"

namespace otmil {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

inline int to_int(Label l) noexcept { return l == Label::positive ? 1 : 0; }

struct Instance {
  std::vector<double> features;
  std::optional<Label> true_label;
};

struct Bag {
  std::string bag_id;
  Label label = Label::negative;
  std::vector<Instance> instances;

  bool positive() const noexcept { return label == Label::positive; }

  // True when every instance carries a ground-truth label.
  bool fully_labeled() const noexcept {
    for (const auto& inst : instances) {
      if (!inst.true_label) return false;
    }
    return true;
  }
};

struct Dataset {
  std::string name;
  std::size_t feature_dim = 0;
  std::vector<Bag> bags;

  std::size_t instance_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : bags) n += b.instances.size();
    return n;
  }
  std::size_t positive_bag_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : bags) n += b.positive() ? 1 : 0;
    return n;
  }
  std::size_t negative_bag_count() const noexcept { return bags.size() - positive_bag_count(); }

  bool fully_labeled() const noexcept {
    for (const auto& b : bags) {
      if (!b.fully_labeled()) return false;
    }
    return true;
  }
};

// Bag label must equal the OR of its instance labels whenever all of them are known.
inline bool bag_label_consistent(const Bag& bag) noexcept {
  if (!bag.fully_labeled()) return true;
  bool any_pos = false;
  for (const auto& inst : bag.instances) any_pos |= (*inst.true_label == Label::positive);
  return any_pos == bag.positive();
}

// Throws on any structural violation. `require_both_classes` adds the
// training-use requirement of at least one bag of each label.
inline void validate(const Dataset& ds, bool require_both_classes = false) {
  for (const auto& bag : ds.bags) {
    if (bag.instances.empty()) {
      throw Error("bag '" + bag.bag_id + "' has no instances");
    }
    for (const auto& inst : bag.instances) {
      if (inst.features.size() != ds.feature_dim) {
        throw Error("bag '" + bag.bag_id + "': feature dim " +
                    std::to_string(inst.features.size()) + " != " +
                    std::to_string(ds.feature_dim));
      }
      for (double v : inst.features) {
        if (!std::isfinite(v)) throw Error("bag '" + bag.bag_id + "': non-finite feature");
      }
    }
    if (!bag_label_consistent(bag)) {
      throw Error("bag '" + bag.bag_id + "': bag label contradicts instance labels");
    }
  }
  if (require_both_classes) {
    if (ds.positive_bag_count() == 0) throw Error("dataset has no positive bags");
    if (ds.negative_bag_count() == 0) throw Error("dataset has no negative bags");
  }
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& bag_indices,
                      std::string name) {
  Dataset out{std::move(name), ds.feature_dim, {}};
  out.bags.reserve(bag_indices.size());
  for (auto i : bag_indices) out.bags.push_back(ds.bags.at(i));
  return out;
}

// Per-dimension z-scoring fitted on one dataset and applied to others, so test
// folds never inform the statistics. Constant dimensions keep scale 1.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;
};

inline FeatureScaler fit_scaler(const Dataset& ds) {
  FeatureScaler s{std::vector<double>(ds.feature_dim, 0.0), std::vector<double>(ds.feature_dim, 1.0)};
  const auto n = static_cast<double>(ds.instance_count());
  if (n == 0.0) return s;
  std::vector<double> sq(ds.feature_dim, 0.0);
  for (const auto& bag : ds.bags) {
    for (const auto& inst : bag.instances) {
      for (std::size_t j = 0; j < ds.feature_dim; ++j) s.mean[j] += inst.features[j];
    }
  }
  for (double& m : s.mean) m /= n;
  for (const auto& bag : ds.bags) {
    for (const auto& inst : bag.instances) {
      for (std::size_t j = 0; j < ds.feature_dim; ++j) {
        const double d = inst.features[j] - s.mean[j];
        sq[j] += d * d;
      }
    }
  }
  for (std::size_t j = 0; j < ds.feature_dim; ++j) {
    const double sd = std::sqrt(sq[j] / n);
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

inline void apply_scaler(const FeatureScaler& s, Dataset& ds) {
  if (s.mean.size() != ds.feature_dim) throw Error("scaler: feature dim mismatch");
  for (auto& bag : ds.bags) {
    for (auto& inst : bag.instances) {
      for (std::size_t j = 0; j < ds.feature_dim; ++j) {
        inst.features[j] = (inst.features[j] - s.mean[j]) / s.scale[j];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

enum class Scheme { normal, hard };

struct GenConfig {
  Scheme scheme = Scheme::normal;
  std::size_t n_bags = 200;        // training bags
  std::size_t test_bags = 100;     // bags per test split
  std::size_t bag_size = 100;
  double positive_ratio = 0.10;
  double positive_bag_fraction = 0.5;
  std::size_t n_concepts = 1;
  std::size_t feature_dim = 16;
  double cluster_separation = 4.0;
  // Concept B sits at cluster_separation * hard_concept_scale (hard scheme only).
  double hard_concept_scale = 1.0;
  // Per positive instance, probability of drawing concept A in mixed bags.
  double concept_a_prob = 0.5;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

// round-half-up of ratio * bag_size
inline std::size_t positives_per_bag(const GenConfig& cfg) {
  if (!(cfg.positive_ratio > 0.0 && cfg.positive_ratio < 1.0)) {
    throw Error("positive_ratio must lie in (0, 1)");
  }
  if (cfg.bag_size < 1) throw Error("bag_size must be >= 1");
  const auto a = static_cast<std::size_t>(
      std::floor(cfg.positive_ratio * static_cast<double>(cfg.bag_size) + 0.5));
  if (a < 1) throw Error("empty positive content");
  if (a > cfg.bag_size) throw Error("positive count exceeds bag size");
  return a;
}

namespace detail {

struct BlobCenters {
  std::vector<double> negative;
  std::vector<double> concept_a;
  std::vector<double> concept_b;
};

inline BlobCenters blob_centers(const GenConfig& cfg) {
  if (cfg.feature_dim < 2) throw Error("feature_dim must be >= 2");
  if (!(cfg.cluster_separation > 0.0)) throw Error("cluster_separation must be > 0");
  BlobCenters c;
  c.negative.assign(cfg.feature_dim, 0.0);
  c.concept_a.assign(cfg.feature_dim, 0.0);
  c.concept_b.assign(cfg.feature_dim, 0.0);
  c.concept_a[0] = cfg.cluster_separation;
  c.concept_b[1] = cfg.cluster_separation * cfg.hard_concept_scale;
  return c;
}

enum class PositiveMix { only_a, only_b, mixed };

inline Bag make_blob_bag(const GenConfig& cfg, const BlobCenters& centers, bool positive,
                         PositiveMix mix, std::size_t a, std::string id, Rng& rng) {
  Bag bag{std::move(id), positive ? Label::positive : Label::negative, {}};
  bag.instances.reserve(cfg.bag_size);
  const std::size_t n_pos = positive ? a : 0;
  for (std::size_t k = 0; k < cfg.bag_size; ++k) {
    if (k < n_pos) {
      bool use_a = true;
      if (mix == PositiveMix::only_b) use_a = false;
      if (mix == PositiveMix::mixed) use_a = rng.bernoulli(cfg.concept_a_prob);
      const auto& mean = use_a ? centers.concept_a : centers.concept_b;
      bag.instances.push_back({sample_gaussian(rng, mean, cfg.noise_std), Label::positive});
    } else {
      bag.instances.push_back(
          {sample_gaussian(rng, centers.negative, cfg.noise_std), Label::negative});
    }
  }
  rng.shuffle(bag.instances);
  return bag;
}

inline Dataset make_blob_dataset(const GenConfig& cfg, std::size_t n_bags, PositiveMix mix,
                                 const std::string& name, Rng& rng) {
  const std::size_t a = positives_per_bag(cfg);
  const auto centers = blob_centers(cfg);
  const auto n_pos = static_cast<std::size_t>(
      std::floor(cfg.positive_bag_fraction * static_cast<double>(n_bags) + 0.5));
  std::vector<bool> labels(n_bags, false);
  for (std::size_t i = 0; i < n_pos && i < n_bags; ++i) labels[i] = true;
  rng.shuffle(labels);

  Dataset ds{name, cfg.feature_dim, {}};
  ds.bags.reserve(n_bags);
  for (std::size_t i = 0; i < n_bags; ++i) {
    ds.bags.push_back(
        make_blob_bag(cfg, centers, labels[i], mix, a, name + "-" + std::to_string(i), rng));
  }
  return ds;
}

}  // namespace detail

// Gaussian-blob analog of the normal-bag construction: every positive bag holds
// exactly round(ratio * bag_size) positives drawn from one cluster.
inline Dataset generate_normal_bags(const GenConfig& cfg, Rng& rng,
                                    const std::string& name = "train") {
  if (cfg.scheme != Scheme::normal) throw Error("generate_normal_bags requires scheme=normal");
  return detail::make_blob_dataset(cfg, cfg.n_bags, detail::PositiveMix::only_a, name, rng);
}

struct HardBagSplits {
  Dataset train;
  Dataset test_normal;
  Dataset test_pos0;  // concept A only
  Dataset test_pos8;  // concept B only
};

inline HardBagSplits generate_hard_bags(const GenConfig& cfg, Rng& rng) {
  if (cfg.scheme != Scheme::hard) throw Error("generate_hard_bags requires scheme=hard");
  if (cfg.n_concepts != 2) throw Error("hard scheme requires n_concepts = 2");
  using detail::PositiveMix;
  HardBagSplits s;
  s.train = detail::make_blob_dataset(cfg, cfg.n_bags, PositiveMix::mixed, "train", rng);
  s.test_normal =
      detail::make_blob_dataset(cfg, cfg.test_bags, PositiveMix::mixed, "test_normal", rng);
  s.test_pos0 = detail::make_blob_dataset(cfg, cfg.test_bags, PositiveMix::only_a, "test_pos0", rng);
  s.test_pos8 = detail::make_blob_dataset(cfg, cfg.test_bags, PositiveMix::only_b, "test_pos8", rng);
  return s;
}

// ---------------------------------------------------------------------------
// Bag construction over a labeled image pool (real MNIST via IDX).
// Positive and negative bags are formed in pairs, sampling without
// replacement, until either pool can no longer supply a full pair.
// ---------------------------------------------------------------------------

inline Dataset bags_from_pool(const Matrix& features, const std::vector<int>& digits,
                              const std::vector<int>& concept_a_digits,
                              const std::vector<int>& concept_b_digits, const GenConfig& cfg,
                              detail::PositiveMix mix, const std::string& name, Rng& rng) {
  if (features.rows() != digits.size()) throw Error("feature/digit count mismatch");
  const std::size_t a = positives_per_bag(cfg);
  const std::size_t k = cfg.bag_size;
  auto in = [](const std::vector<int>& set, int d) {
    return std::find(set.begin(), set.end(), d) != set.end();
  };
  std::vector<std::size_t> pool_a, pool_b, pool_neg;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (in(concept_a_digits, digits[i])) {
      pool_a.push_back(i);
    } else if (in(concept_b_digits, digits[i])) {
      pool_b.push_back(i);
    } else {
      pool_neg.push_back(i);
    }
  }
  rng.shuffle(pool_a);
  rng.shuffle(pool_b);
  rng.shuffle(pool_neg);

  auto take = [&](std::vector<std::size_t>& pool, Label lbl, Bag& bag) {
    const auto idx = pool.back();
    pool.pop_back();
    const auto r = features.row(idx);
    bag.instances.push_back({std::vector<double>(r.begin(), r.end()), lbl});
  };

  Dataset ds{name, features.cols(), {}};
  for (std::size_t pair = 0;; ++pair) {
    if (pool_neg.size() < (k - a) + k) break;
    // Pick concepts first so exhaustion is detected before anything is consumed.
    std::vector<bool> use_a(a, mix != detail::PositiveMix::only_b);
    if (mix == detail::PositiveMix::mixed) {
      for (std::size_t j = 0; j < a; ++j) use_a[j] = rng.bernoulli(cfg.concept_a_prob);
    }
    const auto need_a = static_cast<std::size_t>(std::count(use_a.begin(), use_a.end(), true));
    if (pool_a.size() < need_a || pool_b.size() < a - need_a) break;

    Bag pos{name + "-" + std::to_string(2 * pair), Label::positive, {}};
    for (std::size_t j = 0; j < a; ++j) take(use_a[j] ? pool_a : pool_b, Label::positive, pos);
    for (std::size_t j = a; j < k; ++j) take(pool_neg, Label::negative, pos);
    rng.shuffle(pos.instances);
    Bag neg{name + "-" + std::to_string(2 * pair + 1), Label::negative, {}};
    for (std::size_t j = 0; j < k; ++j) take(pool_neg, Label::negative, neg);
    ds.bags.push_back(std::move(pos));
    ds.bags.push_back(std::move(neg));
  }
  return ds;
}

// Digit 9 positive.
inline Dataset mnist_normal_bags(const Matrix& features, const std::vector<int>& digits,
                                 const GenConfig& cfg, Rng& rng,
                                 const std::string& name = "train") {
  return bags_from_pool(features, digits, {9}, {}, cfg, detail::PositiveMix::only_a, name, rng);
}

// Digits 0 (concept A) and 8 (concept B) positive.
inline Dataset mnist_hard_bags(const Matrix& features, const std::vector<int>& digits,
                               const GenConfig& cfg, Rng& rng, detail::PositiveMix mix,
                               const std::string& name) {
  return bags_from_pool(features, digits, {0}, {8}, cfg, mix, name, rng);
}

// ---------------------------------------------------------------------------
// NDJSON: one bag per line
//   {"bag_id": str, "label": 0|1, "instances": [{"features": [...], "label": 0|1|null}]}
// ---------------------------------------------------------------------------

inline nlohmann::json bag_to_json(const Bag& bag) {
  nlohmann::json insts = nlohmann::json::array();
  for (const auto& inst : bag.instances) {
    nlohmann::json j;
    j["features"] = inst.features;
    if (inst.true_label) {
      j["label"] = to_int(*inst.true_label);
    } else {
      j["label"] = nullptr;
    }
    insts.push_back(std::move(j));
  }
  return {{"bag_id", bag.bag_id}, {"label", to_int(bag.label)}, {"instances", std::move(insts)}};
}

inline void save_ndjson(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& bag : ds.bags) out << bag_to_json(bag).dump() << '\n';
  if (!out) throw Error("write failed: " + path);
}

namespace detail {
inline Label parse_label(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) throw Error(where + ": label must be 0 or 1");
  const auto v = j.get<long long>();
  if (v != 0 && v != 1) throw Error(where + ": label must be 0 or 1");
  return v == 1 ? Label::positive : Label::negative;
}

inline std::string stem(const std::string& path) {
  auto slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}
}  // namespace detail

inline Dataset parse_ndjson(std::istream& in, std::string name) {
  Dataset ds{std::move(name), 0, {}};
  std::string line;
  std::size_t line_no = 0;
  bool dim_known = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(where + ": malformed JSON: " + e.what());
    }
    try {
      Bag bag;
      bag.bag_id = j.at("bag_id").get<std::string>();
      bag.label = detail::parse_label(j.at("label"), where);
      for (const auto& ji : j.at("instances")) {
        Instance inst;
        inst.features = ji.at("features").get<std::vector<double>>();
        if (ji.contains("label") && !ji["label"].is_null()) {
          inst.true_label = detail::parse_label(ji["label"], where);
        }
        if (!dim_known) {
          ds.feature_dim = inst.features.size();
          dim_known = true;
        } else if (inst.features.size() != ds.feature_dim) {
          throw Error(where + ": inconsistent feature dim " +
                      std::to_string(inst.features.size()) + " (expected " +
                      std::to_string(ds.feature_dim) + ")");
        }
        bag.instances.push_back(std::move(inst));
      }
      if (bag.instances.empty()) throw Error(where + ": bag has no instances");
      if (!bag_label_consistent(bag)) {
        throw Error(where + ": bag label contradicts instance labels");
      }
      ds.bags.push_back(std::move(bag));
    } catch (const nlohmann::json::exception& e) {
      throw Error(where + ": " + e.what());
    }
  }
  validate(ds);
  return ds;
}

inline Dataset load_ndjson(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  return parse_ndjson(in, detail::stem(path));
}

// ---------------------------------------------------------------------------
// CSV benchmark features: header bag_id,bag_label,f0,...,f{d-1}; one instance
// per row. Instance labels are unknown.
// ---------------------------------------------------------------------------

inline Dataset parse_benchmark_csv(std::istream& in, std::string name) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      out.push_back(cell);
    }
    return out;
  };
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "bag_id" || header[1] != "bag_label") {
    throw Error("CSV header must be bag_id,bag_label,f0,...");
  }
  const std::size_t dim = header.size() - 2;
  Dataset ds{std::move(name), dim, {}};
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto cells = split(line);
    if (cells.size() != header.size()) throw Error(where + ": wrong column count");
    Label lbl;
    try {
      const double v = std::stod(cells[1]);
      if (v == 1.0) {
        lbl = Label::positive;
      } else if (v == 0.0 || v == -1.0) {
        lbl = Label::negative;
      } else {
        throw Error(where + ": bag_label must be 0 or 1");
      }
      Instance inst;
      inst.features.reserve(dim);
      for (std::size_t c = 2; c < cells.size(); ++c) inst.features.push_back(std::stod(cells[c]));
      auto [it, inserted] = index.try_emplace(cells[0], ds.bags.size());
      if (inserted) {
        ds.bags.push_back(Bag{cells[0], lbl, {}});
      } else if (ds.bags[it->second].label != lbl) {
        throw Error(where + ": bag label differs within bag '" + cells[0] + "'");
      }
      ds.bags[it->second].instances.push_back(std::move(inst));
    } catch (const std::invalid_argument&) {
      throw Error(where + ": non-numeric value");
    } catch (const std::out_of_range&) {
      throw Error(where + ": value out of range");
    }
  }
  validate(ds);
  return ds;
}

inline Dataset load_benchmark_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  return parse_benchmark_csv(in, detail::stem(path));
}

// Dispatch on extension: .csv is the benchmark format, anything else NDJSON.
inline Dataset load_dataset(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    return load_benchmark_csv(path);
  }
  return load_ndjson(path);
}

// ---------------------------------------------------------------------------
// IDX (big-endian). Images: magic 0x00000803, dims [n, rows, cols], u8.
// Labels: magic 0x00000801, dims [n], u8.
// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  if (off + 4 > b.size()) throw Error("not IDX: truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}
}  // namespace detail

struct IdxImages {
  Matrix features;          // one row per image, scaled to [0, 1]
  std::vector<int> digits;  // 0..9
};

inline IdxImages parse_idx(const std::vector<unsigned char>& images,
                           const std::vector<unsigned char>& labels) {
  using detail::be32;
  if (be32(images, 0) != 0x00000803u) throw Error("not IDX: bad image magic");
  if (be32(labels, 0) != 0x00000801u) throw Error("not IDX: bad label magic");
  const std::size_t n = be32(images, 4);
  const std::size_t rows = be32(images, 8);
  const std::size_t cols = be32(images, 12);
  const std::size_t n_labels = be32(labels, 4);
  if (n != n_labels) {
    throw Error("IDX count mismatch: " + std::to_string(n) + " images vs " +
                std::to_string(n_labels) + " labels");
  }
  const std::size_t dim = rows * cols;
  if (images.size() < 16 + n * dim) throw Error("IDX image file truncated");
  if (labels.size() < 8 + n) throw Error("IDX label file truncated");

  IdxImages out{Matrix(n, dim), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    auto r = out.features.row(i);
    for (std::size_t j = 0; j < dim; ++j) r[j] = images[16 + i * dim + j] / 255.0;
    const int d = labels[8 + i];
    if (d > 9) throw Error("IDX label out of range: " + std::to_string(d));
    out.digits[i] = d;
  }
  return out;
}

inline IdxImages load_idx_mnist(const std::string& images_path, const std::string& labels_path) {
  return parse_idx(detail::read_all(images_path), detail::read_all(labels_path));
}

// ---------------------------------------------------------------------------
// Stratified k-fold over bags.
// ---------------------------------------------------------------------------

struct Fold {
  Dataset train;
  Dataset test;
};

inline std::vector<Fold> kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("kfold: k must be >= 2");
  if (k > ds.bags.size()) throw Error("kfold: k exceeds bag count");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.bags.size(); ++i) (ds.bags[i].positive() ? pos : neg).push_back(i);
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);

  // Deal positives then negatives round-robin with one running cursor so
  // fold sizes differ by at most one.
  std::vector<std::size_t> fold_of(ds.bags.size());
  std::size_t cursor = 0;
  for (auto i : pos) fold_of[i] = cursor++ % k;
  for (auto i : neg) fold_of[i] = cursor++ % k;

  std::vector<Fold> folds;
  folds.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < ds.bags.size(); ++i) (fold_of[i] == f ? te : tr).push_back(i);
    folds.push_back({subset(ds, tr, ds.name + "-fold" + std::to_string(f) + "-train"),
                     subset(ds, te, ds.name + "-fold" + std::to_string(f) + "-test")});
  }
  return folds;
}

}  // namespace otmil
