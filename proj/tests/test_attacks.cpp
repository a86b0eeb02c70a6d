#include <gtest/gtest.h>

#include <cmath>

#include "amsreg/attacks.hpp"
#include "amsreg/errors.hpp"
#include "amsreg/losses.hpp"
#include "test_support.hpp"

using namespace amsreg;
using amsreg::testing::as_tensor;
using amsreg::testing::LinearOracle;
using amsreg::testing::random_point;

namespace {

template <typename T>
Tensor<T> random_images(Rng& rng, std::size_t b, std::size_t d) {
  std::vector<T> v(b * d);
  for (T& x : v) {
    // Include exact 0/1 endpoints so the box clip is exercised.
    const double u = rng.uniform(-0.2, 1.2);
    x = static_cast<T>(std::clamp(u, 0.0, 1.0));
  }
  return Tensor<T>({b, d}, std::move(v));
}

std::vector<std::size_t> random_labels(Rng& rng, std::size_t b, std::size_t k) {
  std::vector<std::size_t> y(b);
  for (auto& v : y) v = rng.below(k);
  return y;
}

template <typename T>
void expect_within_budget(const Tensor<T>& adv, const Tensor<T>& x, double eps) {
  const T e = static_cast<T>(eps);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    ASSERT_LE(std::abs(adv.at(i) - x.at(i)), e) << "coordinate " << i;
    ASSERT_GE(adv.at(i), T(0));
    ASSERT_LE(adv.at(i), T(1));
  }
}

Dataset toy_blobs(std::size_t dim, std::uint64_t seed) {
  BlobSpec spec;
  spec.dim = dim;
  spec.num_classes = 3;
  spec.n_per_class = 40;
  spec.noise_std = 0.08;
  spec.separation = 2.0;
  spec.seed = seed;
  return synthetic_blobs(spec, Split::test);
}

}  // namespace

TEST(CrossEntropy, UniformZeroLogitsIsLogK) {
  const auto ce = cross_entropy(Tensor<double>::zeros({3, 10}), {0, 4, 9});
  EXPECT_NEAR(ce.item(), std::log(10.0), 1e-15);
}

TEST(CrossEntropy, ConfidentCorrectLogitsApproachZero) {
  for (double m : {10.0, 100.0, 1000.0}) {
    const auto ce = cross_entropy(Tensor<double>({1, 3}, {m, 0.0, 0.0}), {0});
    EXPECT_LE(ce.item(), 2.0 * std::exp(-m) + 1e-300);
    EXPECT_GE(ce.item(), 0.0);
  }
}

TEST(CrossEntropy, MatchesNegativeLogSoftmaxOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + rng.below(4), k = 2 + rng.below(6);
    std::vector<double> z(b * k);
    for (double& v : z) v = rng.uniform(-5, 5);
    const auto y = random_labels(rng, b, k);
    double expected = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(z[r * k + c]);
      expected -= std::log(std::exp(z[r * k + y[r]]) / s);
    }
    EXPECT_NEAR(cross_entropy(Tensor<double>({b, k}, z), y).item(), expected / static_cast<double>(b), 1e-10);
  }
}

TEST(CrossEntropy, BadLabelIsInputError) {
  EXPECT_THROW(cross_entropy(Tensor<double>::zeros({1, 3}), {3}), InputError);
}

TEST(Fgsm, ZeroEpsReturnsInput) {
  const auto model = Model<double>::build(mlp_config({5, 6, 3}), 0);
  Rng rng(1);
  const auto x = random_images<double>(rng, 4, 5);
  const auto adv = fgsm(model, x, random_labels(rng, 4, 3), 0.0);
  EXPECT_EQ(std::vector<double>(adv.values().begin(), adv.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
}

TEST(Fgsm, ZeroModelLeavesInputUnchanged) {
  const auto model = Model<double>::zeros(mlp_config({5, 6, 3}));
  Rng rng(1);
  const auto x = random_images<double>(rng, 4, 5);
  const auto adv = fgsm(model, x, random_labels(rng, 4, 3), 0.1);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(adv.at(i), x.at(i));
}

TEST(Fgsm, LinearModelMatchesClosedFormStep) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto o = LinearOracle::random(rng, 2, 3);
    const auto x = random_point(rng, 2);
    const std::size_t y = rng.below(3);
    const double eps = 0.05;
    const auto g = o.ce_grad(x, y);
    const auto adv = fgsm(o.model<double>(), as_tensor<double>(x, {1, 2}), {y}, eps);
    for (std::size_t i = 0; i < 2; ++i) {
      const double expected = std::clamp(x[i] + eps * (g[i] > 0 ? 1.0 : -1.0), 0.0, 1.0);
      EXPECT_NEAR(adv.at(i), expected, 1e-15);
    }
  }
}

TEST(Pgd, OneFullStepEqualsFgsmBitwise) {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = Model<float>::build(mlp_config({12, 16, 4}), seed);
    const auto x = random_images<float>(rng, 8, 12);
    const auto y = random_labels(rng, 8, 4);
    AttackConfig c;
    c.eps = rng.uniform(0.001, 0.3);
    c.iters = 1;
    c.step_size = c.eps * rng.uniform(1.0, 3.0);
    const auto a = pgd(model, x, y, c);
    const auto b = fgsm(model, x, y, c.eps);
    for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(a.at(i), b.at(i));
  }
}

TEST(Pgd, ZeroModelLeavesInputUnchanged) {
  const auto model = Model<double>::zeros(lenet_small_config({1, 16, 16}, 3));
  Rng rng(5);
  const auto x = random_images<double>(rng, 2, 256);
  const Tensor<double> images({2, 1, 16, 16}, std::vector<double>(x.values().begin(), x.values().end()));
  const auto adv = pgd(model, images, {0, 2}, attack_preset("pgd-cifar"));
  for (std::size_t i = 0; i < images.numel(); ++i) EXPECT_EQ(adv.at(i), images.at(i));
}

TEST(Pgd, PresetsFollowTheProtocol) {
  const auto cifar = attack_preset("pgd-cifar");
  EXPECT_EQ(cifar.kind, AttackKind::pgd);
  EXPECT_DOUBLE_EQ(cifar.eps, 8.0 / 255.0);
  EXPECT_EQ(cifar.iters, 5u);
  EXPECT_DOUBLE_EQ(cifar.step_size, 2.0 / 255.0);
  const auto fmnist = attack_preset("pgd-fmnist");
  EXPECT_DOUBLE_EQ(fmnist.eps, 25.0 / 255.0);
  EXPECT_EQ(fmnist.iters, 10u);
  EXPECT_DOUBLE_EQ(fmnist.step_size, 6.25 / 255.0);
  EXPECT_FALSE(cifar.random_start);
  const auto f = attack_preset("fgsm", 0.1);
  EXPECT_EQ(f.kind, AttackKind::fgsm);
  EXPECT_DOUBLE_EQ(f.eps, 0.1);
  EXPECT_THROW(attack_preset("fgsm"), ConfigError);
  EXPECT_THROW(attack_preset("cw"), ConfigError);
}

TEST(Pgd, InvalidConfigIsConfigError) {
  AttackConfig c;
  c.eps = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.eps = 0.1;
  c.iters = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.iters = 1;
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

template <typename T>
void budget_sweep() {
  Rng rng(6);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto model = Model<T>::build(mlp_config({10, 16, 3}), seed);
    const auto x = random_images<T>(rng, 6, 10);
    const auto y = random_labels(rng, 6, 3);
    AttackConfig c;
    c.eps = rng.uniform(0.0, 0.4);
    c.step_size = rng.uniform(0.001, 0.2);
    c.iters = 1 + rng.below(8);
    c.random_start = seed % 2 == 0;
    c.seed = seed;
    expect_within_budget(pgd(model, x, y, c), x, c.eps);
    expect_within_budget(fgsm(model, x, y, c.eps), x, c.eps);
  }
}

TEST(Pgd, BudgetHoldsExactlyInBothPrecisions) {
  budget_sweep<float>();
  budget_sweep<double>();
}

TEST(Pgd, ProjectionOrderCommutes) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_images<double>(rng, 1, 16);
    std::vector<double> cand(16);
    for (double& v : cand) v = rng.uniform(-0.5, 1.5);
    const double eps = rng.uniform(0.0, 0.5);
    const auto p = project_linf(Tensor<double>({1, 16}, cand), x, eps);
    for (std::size_t i = 0; i < 16; ++i) {
      const double box_first = std::clamp(std::clamp(cand[i], 0.0, 1.0), x.at(i) - eps, x.at(i) + eps);
      EXPECT_NEAR(p.at(i), box_first, 1e-15);
    }
  }
}

TEST(Pgd, DeterministicWithoutRandomStart) {
  const auto model = Model<double>::build(mlp_config({8, 10, 3}), 1);
  Rng rng(8);
  const auto x = random_images<double>(rng, 5, 8);
  const auto y = random_labels(rng, 5, 3);
  const auto c = attack_preset("pgd-fmnist");
  const auto a = pgd(model, x, y, c), b = pgd(model, x, y, c);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(a.at(i), b.at(i));
  AttackConfig r = c;
  r.random_start = true;
  r.seed = 4;
  const auto ra = pgd(model, x, y, r), rb = pgd(model, x, y, r);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(ra.at(i), rb.at(i));
}

TEST(Accuracy, ZeroEpsEqualsCleanAccuracy) {
  const auto data = toy_blobs(6, 1);
  const auto model = Model<double>::build(mlp_config({6, 8, 3}), 2);
  AttackConfig c = attack_preset("pgd-cifar", 0.0);
  EXPECT_EQ(adversarial_accuracy(model, data, c), clean_accuracy(model, data));
}

TEST(Accuracy, NonIncreasingInEps) {
  const auto data = toy_blobs(6, 2);
  // A fixed linear model pointing each class at its own mean.
  auto model = Model<double>::zeros(mlp_config({6, 3}));
  auto w = model.parameters()[0].mutable_values();
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < 6; ++k) w[k * 3 + data.labels[i]] += (data.input(i)[k] - 0.5) / 40.0;
  }
  const double eps = 0.05;
  double previous = 2.0;
  for (double e : {0.0, eps / 2, eps, 2 * eps}) {
    AttackConfig c;
    c.eps = e;
    c.step_size = e / 4 + 1e-6;
    c.iters = 10;
    const double acc = adversarial_accuracy(model, data, c);
    EXPECT_LE(acc, previous) << "eps " << e;
    previous = acc;
  }
}

TEST(Accuracy, EmptyDatasetIsInputError) {
  const auto model = Model<double>::zeros(mlp_config({3, 2}));
  Dataset empty;
  empty.sample_shape = {3};
  EXPECT_THROW(adversarial_accuracy(model, empty, AttackConfig{}), InputError);
}

TEST(Accuracy, ReportJsonFields) {
  const auto data = toy_blobs(6, 1);
  const auto model = Model<double>::build(mlp_config({6, 3}), 2);
  const auto j = robustness_to_json(evaluate_robustness(model, data, attack_preset("pgd-cifar")));
  for (const char* key : {"clean_acc", "adv_acc", "config", "n_samples", "seed", "schema_version"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["n_samples"], data.size());
  EXPECT_EQ(attack_from_json(j["config"]).iters, 5u);
}
