#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "otmil/model.hpp"

using namespace otmil;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

double batch_loss(const ClassifierParams& p, const std::vector<Example>& batch) {
  double s = 0.0;
  for (const auto& ex : batch) s += soft_cross_entropy(forward(p, ex.features), ex.target);
  return s / static_cast<double>(batch.size());
}

double gradient_error(Arch arch, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t dim = 2 + rng.below(7);
  const std::size_t hidden = 1 + rng.below(4);
  auto params = init_classifier(arch, dim, hidden, rng);
  std::vector<std::vector<double>> xs;
  std::vector<Example> batch;
  for (int i = 0; i < 5; ++i) xs.push_back(random_vec(rng, dim));
  for (const auto& x : xs) {
    const double t = rng.uniform();
    batch.push_back({x, {t, 1.0 - t}});
  }
  const auto analytic = flatten(backward(params, batch));
  const auto numeric = oracle::numeric_gradient(
      [&](const std::vector<double>& theta) {
        auto q = params;
        unflatten(q, theta);
        return batch_loss(q, batch);
      },
      flatten(params));
  return oracle::relative_error(analytic, numeric);
}

}  // namespace

TEST(Forward, ZeroParamsGiveHalf) {
  for (auto arch : {Arch::linear, Arch::mlp}) {
    const auto p = make_classifier(arch, 3, 4);
    const std::vector<double> x{1.0, -2.0, 0.5};
    const auto out = forward(p, x);
    EXPECT_DOUBLE_EQ(out[0], 0.5);
    EXPECT_DOUBLE_EQ(out[1], 0.5);
  }
}

TEST(Forward, LinearMatchesHandComputation) {
  auto p = make_classifier(Arch::linear, 2);
  p.layers[0].weights = Matrix(2, 2, std::vector<double>{1.0, -1.0, 0.5, 2.0});
  p.layers[0].bias = {0.25, -0.5};
  const std::vector<double> x{2.0, 1.0};
  // z0 = 2 - 1 + 0.25 = 1.25, z1 = 1 + 2 - 0.5 = 2.5
  const double e0 = std::exp(1.25), e1 = std::exp(2.5);
  const auto out = forward(p, x);
  EXPECT_NEAR(out[0], e0 / (e0 + e1), 1e-15);
  EXPECT_NEAR(out[1], e1 / (e0 + e1), 1e-15);
}

TEST(Forward, MlpMatchesHandComputation) {
  auto p = make_classifier(Arch::mlp, 2, 2);
  p.layers[0].weights = Matrix(2, 2, std::vector<double>{1.0, 1.0, -1.0, 0.0});
  p.layers[0].bias = {0.0, 0.5};
  p.layers[1].weights = Matrix(2, 2, std::vector<double>{2.0, 1.0, -1.0, 3.0});
  p.layers[1].bias = {0.0, 0.1};
  const std::vector<double> x{1.0, 2.0};
  // h = relu([3, -0.5]) = [3, 0]; z = [6, -2.9]
  const auto out = forward(p, x);
  const double e0 = std::exp(6.0), e1 = std::exp(-2.9);
  EXPECT_NEAR(out[0], e0 / (e0 + e1), 1e-15);
}

TEST(Forward, OutputsSumToOne) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto arch = i % 2 ? Arch::mlp : Arch::linear;
    auto p = init_classifier(arch, 6, 5, rng);
    for (auto& l : p.layers) {
      for (double& w : l.weights.data()) w *= 30.0;
    }
    const auto out = forward(p, random_vec(rng, 6, 10.0));
    EXPECT_NEAR(out[0] + out[1], 1.0, 1e-12);
    EXPECT_TRUE(std::isfinite(out[0]));
  }
}

TEST(Forward, DimensionMismatchRejected) {
  const auto p = make_classifier(Arch::linear, 3);
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(forward(p, x), Error);
}

TEST(CrossEntropy, Cases) {
  EXPECT_NEAR(soft_cross_entropy({1.0, 0.0}, {1.0, 0.0}), 0.0, 1e-12);
  EXPECT_NEAR(soft_cross_entropy({0.5, 0.5}, {0.5, 0.5}), std::log(2.0), 1e-15);
  EXPECT_NEAR(soft_cross_entropy({0.7, 0.3}, {0.2, 0.8}),
              -(0.2 * std::log(0.7) + 0.8 * std::log(0.3)), 1e-15);
  EXPECT_TRUE(std::isfinite(soft_cross_entropy({0.0, 1.0}, {1.0, 0.0})));
}

TEST(Backward, OutputBiasGradientVanishesAtSymmetry) {
  for (auto arch : {Arch::linear, Arch::mlp}) {
    Rng rng(2);
    auto p = init_classifier(arch, 4, 3, rng);
    // Make the two output rows identical so both logits coincide.
    auto& out = p.layers.back();
    for (std::size_t j = 0; j < out.weights.cols(); ++j) out.weights(1, j) = out.weights(0, j);
    out.bias[1] = out.bias[0];
    const auto x = random_vec(rng, 4);
    const std::vector<Example> batch{{x, {0.5, 0.5}}};
    const auto g = backward(p, batch);
    EXPECT_NEAR(g.layers.back().bias[0], 0.0, 1e-15);
    EXPECT_NEAR(g.layers.back().bias[1], 0.0, 1e-15);
  }
}

TEST(Backward, LinearMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(gradient_error(Arch::linear, seed), 1e-4) << "seed " << seed;
  }
}

TEST(Backward, MlpMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(gradient_error(Arch::mlp, seed), 1e-4) << "seed " << seed;
  }
}

TEST(Backward, UniformTargetsShrinkGradientAtUniformOutput) {
  // At zero weights the output is [0.5, 0.5]; the logit gradient is
  // pred - target, so mixing targets toward uniform must shrink it.
  Rng rng(3);
  const auto p = make_classifier(Arch::linear, 5);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 8; ++i) xs.push_back(random_vec(rng, 5));
  auto norm_at = [&](double mix) {
    std::vector<Example> batch;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double hard = i % 2 ? 1.0 : 0.0;
      const double t = (1.0 - mix) * hard + mix * 0.5;
      batch.push_back({xs[i], {t, 1.0 - t}});
    }
    double n = 0.0;
    for (double v : flatten(backward(p, batch))) n += v * v;
    return std::sqrt(n);
  };
  double prev = norm_at(0.0);
  for (double mix : {0.25, 0.5, 0.75, 1.0}) {
    const double cur = norm_at(mix);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_NEAR(prev, 0.0, 1e-15);
}

TEST(Backward, EmptyBatchRejected) {
  const auto p = make_classifier(Arch::linear, 2);
  EXPECT_THROW(backward(p, std::vector<Example>{}), Error);
}

TEST(Sgd, ZeroGradientOrRateIsNoop) {
  Rng rng(4);
  const auto p = init_classifier(Arch::mlp, 3, 2, rng);
  auto q = p;
  sgd_step(q, zeros_like(p), 0.5);
  EXPECT_EQ(q, p);
  auto g = zeros_like(p);
  for (auto& l : g.layers) {
    for (double& v : l.weights.data()) v = 1.0;
  }
  sgd_step(q, g, 0.0);
  EXPECT_EQ(q, p);
}

TEST(Sgd, SingleWeightArithmetic) {
  auto p = make_classifier(Arch::linear, 1);
  p.layers[0].weights(0, 0) = 1.0;
  auto g = zeros_like(p);
  g.layers[0].weights(0, 0) = 2.0;
  sgd_step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p.layers[0].weights(0, 0), 0.8);
}

TEST(Sgd, ShapeMismatchRejected) {
  auto p = make_classifier(Arch::linear, 2);
  const auto g = make_classifier(Arch::mlp, 2, 3);
  EXPECT_THROW(sgd_step(p, g, 0.1), Error);
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  Rng rng(5);
  for (auto arch : {Arch::linear, Arch::mlp}) {
    const auto p = init_classifier(arch, 7, 3, rng);
    const auto text = to_json(p).dump();
    EXPECT_EQ(classifier_from_json(nlohmann::json::parse(text)), p);
  }
}

TEST(Checkpoint, MalformedRejected) {
  Rng rng(6);
  auto j = to_json(init_classifier(Arch::linear, 3, 0, rng));
  auto bad = j;
  bad["layers"][0]["bias"] = {1.0};
  EXPECT_THROW(classifier_from_json(bad), Error);
  bad = j;
  bad.erase("arch");
  EXPECT_THROW(classifier_from_json(bad), Error);
  bad = j;
  bad["arch"] = "cnn";
  EXPECT_THROW(classifier_from_json(bad), Error);
}

TEST(Config, SgdValidation) {
  EXPECT_THROW(validate(SgdConfig{0.0, 1, 1, 0}), Error);
  EXPECT_THROW(validate(SgdConfig{0.1, 0, 1, 0}), Error);
  EXPECT_NO_THROW(validate(SgdConfig{}));
  EXPECT_EQ(SgdConfig{}.learning_rate, 0.001);
}
