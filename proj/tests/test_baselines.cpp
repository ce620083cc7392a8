#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "otmil/baselines.hpp"

using namespace otmil;

namespace {

Bag random_bag(Rng& rng, std::size_t k, std::size_t dim, bool positive) {
  Bag bag{"b", positive ? Label::positive : Label::negative, {}};
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> x(dim);
    for (double& v : x) v = rng.normal();
    bag.instances.push_back({x, std::nullopt});
  }
  return bag;
}

double bag_loss(const BaselineModel& m, const Bag& bag, std::size_t dim) {
  const double s = std::clamp(baseline_bag_prob(m, bag, dim), kBagProbFloor, 1.0 - kBagProbFloor);
  return bag.positive() ? -std::log(s) : -std::log(1.0 - s);
}

double pooling_gradient_error(PoolKind kind, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t dim = 2 + rng.below(5);
  BaselineConfig cfg;
  cfg.arch = seed % 2 ? Arch::mlp : Arch::linear;
  cfg.hidden = 1 + rng.below(4);
  cfg.attention_hidden = 1 + rng.below(4);
  const auto m = init_baseline(kind, dim, cfg, rng);
  const auto bag = random_bag(rng, 2 + rng.below(5), dim, rng.bernoulli(0.5));
  auto g = zeros_like(m);
  accumulate_bag_gradient(m, bag, dim, g);
  const auto numeric = oracle::numeric_gradient(
      [&](const std::vector<double>& theta) {
        auto q = m;
        unflatten(q, theta);
        return bag_loss(q, bag, dim);
      },
      flatten(m));
  return oracle::relative_error(flatten(g), numeric);
}

}  // namespace

TEST(AttentionPool, SingletonBag) {
  Rng rng(1);
  const auto m = init_baseline(PoolKind::attention, 3, {}, rng);
  const Matrix x(1, 3, std::vector<double>{0.5, -1.0, 2.0});
  const auto out = attention_pool(m.attention, x);
  ASSERT_EQ(out.attn.size(), 1u);
  EXPECT_DOUBLE_EQ(out.attn[0], 1.0);
  EXPECT_EQ(out.bag_feature, (std::vector<double>{0.5, -1.0, 2.0}));
}

TEST(AttentionPool, IdenticalInstancesUniform) {
  Rng rng(2);
  const auto m = init_baseline(PoolKind::attention, 2, {}, rng);
  const Matrix x(4, 2, std::vector<double>{1, 2, 1, 2, 1, 2, 1, 2});
  const auto out = attention_pool(m.attention, x);
  for (double a : out.attn) EXPECT_NEAR(a, 0.25, 1e-15);
}

TEST(AttentionPool, HandComputedChain) {
  AttentionParams p;
  p.V = Matrix(2, 2, std::vector<double>{1.0, 0.0, 0.5, -0.5});
  p.w = {1.0, 2.0};
  p.head = make_classifier(Arch::linear, 2);
  const Matrix x(2, 2, std::vector<double>{1.0, 2.0, -1.0, 0.5});
  // s_k = tanh(x_k0) + 2 tanh(0.5 x_k0 - 0.5 x_k1)
  const double s0 = std::tanh(1.0) + 2.0 * std::tanh(-0.5);
  const double s1 = std::tanh(-1.0) + 2.0 * std::tanh(-0.75);
  const double a0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
  const auto out = attention_pool(p, x);
  EXPECT_NEAR(out.attn[0], a0, 1e-15);
  EXPECT_NEAR(out.attn[1], 1.0 - a0, 1e-15);
  EXPECT_NEAR(out.bag_feature[0], a0 * 1.0 + (1.0 - a0) * -1.0, 1e-15);
  EXPECT_NEAR(out.bag_feature[1], a0 * 2.0 + (1.0 - a0) * 0.5, 1e-15);
}

TEST(AttentionScores, MinMaxNormalization) {
  const std::vector<double> two{0.1, 0.9};
  EXPECT_EQ(attention_instance_scores(two), (std::vector<double>{0.0, 1.0}));
  const std::vector<double> flat{0.3, 0.3, 0.3};
  EXPECT_EQ(attention_instance_scores(flat), (std::vector<double>{0.5, 0.5, 0.5}));
  const std::vector<double> three{0.2, 0.5, 0.8};
  const auto s = attention_instance_scores(three);
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_NEAR(s[1], 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(BaselineGradient, MaxPoolingMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(pooling_gradient_error(PoolKind::max, seed), 1e-4) << "seed " << seed;
  }
}

TEST(BaselineGradient, MeanPoolingMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(pooling_gradient_error(PoolKind::mean, seed), 1e-4) << "seed " << seed;
  }
}

TEST(BaselineGradient, AttentionMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(pooling_gradient_error(PoolKind::attention, seed), 1e-4) << "seed " << seed;
  }
}

TEST(MeanPool, IdenticalInstancesEqualInstanceTraining) {
  // With every instance identical, the bag probability equals the instance
  // probability, so the bag gradient equals the single-instance gradient.
  Rng rng(3);
  const auto m = init_baseline(PoolKind::mean, 3, {}, rng);
  const std::vector<double> x{0.3, -1.2, 0.8};
  Bag bag{"b", Label::positive, {{x, std::nullopt}, {x, std::nullopt}, {x, std::nullopt}}};
  auto g = zeros_like(m);
  const double loss = accumulate_bag_gradient(m, bag, 3, g);
  auto gi = zeros_like(m.instance_clf);
  const double li = accumulate_gradient(m.instance_clf, x, {1.0, 0.0}, gi);
  EXPECT_NEAR(loss, li, 1e-12);
  const auto a = flatten(g), b = flatten(gi);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(PoolTraining, SeparableBlobsReachHighBagAuc) {
  GenConfig gen;
  gen.n_bags = 200;
  gen.bag_size = 20;
  gen.positive_ratio = 0.5;
  gen.feature_dim = 8;
  Rng rng(11);
  const auto train = generate_normal_bags(gen, rng, "train");
  const auto test = generate_normal_bags(gen, rng, "test");
  for (auto kind : {PoolKind::max, PoolKind::mean, PoolKind::attention}) {
    const auto r = pool_baseline_train(train, kind, {0.05, 4, 20, 1});
    const auto rep = evaluate_baseline(r.model, test);
    EXPECT_GE(rep.bag_auc, 0.99) << to_string(kind);
    EXPECT_GE(rep.bag_accuracy, 0.9) << to_string(kind);
  }
}

TEST(PoolTraining, Deterministic) {
  GenConfig gen;
  gen.n_bags = 20;
  gen.bag_size = 10;
  gen.positive_ratio = 0.2;
  gen.feature_dim = 4;
  Rng rng(2);
  const auto ds = generate_normal_bags(gen, rng);
  const auto a = pool_baseline_train(ds, PoolKind::attention, {0.01, 2, 3, 9});
  const auto b = pool_baseline_train(ds, PoolKind::attention, {0.01, 2, 3, 9});
  EXPECT_EQ(flatten(a.model), flatten(b.model));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(PoolKinds, ParseRoundTrip) {
  for (auto k : {PoolKind::max, PoolKind::mean, PoolKind::attention}) {
    EXPECT_EQ(parse_pool_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_pool_kind("gated"), Error);
}
