#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "amsreg/errors.hpp"
#include "amsreg/flatness.hpp"
#include "amsreg/likelihood.hpp"
#include "amsreg/losses.hpp"
#include "amsreg/ops.hpp"
#include "amsreg/training.hpp"
#include "test_support.hpp"

using namespace amsreg;
using amsreg::testing::as_tensor;
using amsreg::testing::LinearOracle;
using amsreg::testing::random_point;
using amsreg::testing::random_tensor;

namespace {

std::vector<double> flat_params(const Model<double>& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.values().begin(), p.values().end());
  return out;
}

// Linear oracle whose logits vanish at x = 0, so p is uniform there.
LinearOracle centred_linear(Rng& rng, std::size_t dim, std::size_t k) {
  auto o = LinearOracle::random(rng, dim, k);
  std::fill(o.b.begin(), o.b.end(), 0.0);
  return o;
}

double oracle_ce_sum(const LinearOracle& o, const std::vector<std::vector<double>>& xs,
                     const std::vector<std::size_t>& ys) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s -= std::log(o.probs(xs[i])[ys[i]]);
  return s;
}

// ||sum_c u_c w_c||^2 where w_c is column c of the [D, K] weight matrix.
double projected_sq(const LinearOracle& o, const std::vector<double>& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < o.dim; ++i) {
    double gi = 0.0;
    for (std::size_t k = 0; k < o.classes; ++k) gi += u[k] * o.w[i * o.classes + k];
    s += gi * gi;
  }
  return s;
}

Dataset separable_blobs(std::uint64_t seed, Split split = Split::train) {
  BlobSpec spec;
  spec.n_per_class = 100;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.separation = 8.0;
  spec.noise_std = 0.05;
  spec.seed = seed;
  return synthetic_blobs(spec, split);
}

TrainConfig short_schedule(std::size_t epochs, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 20;
  c.learning_rate = 0.05;
  c.lr_decay_epochs = {};
  c.seed = seed;
  return c;
}

DefenseConfig regularizer(DefenseMode mode, double lambda, std::size_t n_proj = 1) {
  DefenseConfig d;
  d.mode = mode;
  d.lambda = lambda;
  d.n_proj = n_proj;
  return d;
}

}  // namespace

TEST(Estimator, BasisProjectionsRecoverLinearFrobeniusNorm) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto o = LinearOracle::random(rng, 6, 4);
    const auto model = o.model<double>();
    const auto x = as_tensor<double>(random_point(rng, 6));
    EXPECT_NEAR(frobenius_basis_exhaustive(model, x, JacobianKind::plain), o.frobenius_sq(), 1e-12);
    EXPECT_NEAR(frobenius_exact(model, x, JacobianKind::plain), o.frobenius_sq(), 1e-12);
  }
}

TEST(Estimator, ZeroModelGivesZero) {
  const auto model = Model<double>::zeros(mlp_config({5, 7, 3}));
  Rng rng(2);
  const auto x = as_tensor<double>(random_point(rng, 5));
  for (std::size_t n : {1u, 10u, 100u}) {
    EXPECT_EQ(jacobian_frob_estimate(model, x, n, 3).value, 0.0);
    EXPECT_EQ(ams_frob_estimate(model, x, n, 3).value, 0.0);
  }
}

TEST(Estimator, PlainConvergesToFrobeniusNorm) {
  Rng rng(3);
  const auto o = LinearOracle::random(rng, 8, 3);
  const auto est = jacobian_frob_estimate(o.model<double>(), as_tensor<double>(random_point(rng, 8)), 10000, 4);
  EXPECT_EQ(est.n_proj, 10000u);
  EXPECT_EQ(est.kind, JacobianKind::plain);
  EXPECT_NEAR(est.value, o.frobenius_sq(), 0.05 * o.frobenius_sq());
}

TEST(Estimator, WeightedAtUniformProbabilitiesIsScaledNorm) {
  Rng rng(5);
  const auto o = centred_linear(rng, 8, 4);
  const auto model = o.model<double>();
  const auto x = as_tensor<double>(std::vector<double>(8, 0.0));
  const double expected = o.frobenius_sq() / 16.0;
  EXPECT_NEAR(frobenius_exact(model, x, JacobianKind::weighted), expected, 1e-12);
  const auto est = ams_frob_estimate(model, x, 10000, 6);
  EXPECT_EQ(est.kind, JacobianKind::weighted);
  EXPECT_NEAR(est.value, expected, 0.05 * expected);
}

TEST(Estimator, WeightedConvergesToRowByRowOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto model = Model<double>::build(mlp_config({6, 12, 5}), seed);
    Rng rng(10 + seed);
    const auto x = as_tensor<double>(random_point(rng, 6));
    const double exact = frobenius_exact(model, x, JacobianKind::weighted);
    EXPECT_NEAR(frobenius_basis_exhaustive(model, x, JacobianKind::weighted), exact, 1e-12 * (1 + exact));
    const double est = ams_frob_estimate(model, x, 10000, seed).value;
    EXPECT_NEAR(est, exact, 0.05 * exact);
  }
}

TEST(Estimator, ValuesAreNonNegativeAndSeeded) {
  const auto model = Model<float>::build(lenet_small_config({1, 16, 16}, 4), 1);
  Rng rng(4);
  const auto x = random_tensor(rng, {1, 1, 16, 16}, 0.0, 1.0);
  const Tensor<float> xf({1, 1, 16, 16}, std::vector<float>(x.values().begin(), x.values().end()));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double a = jacobian_frob_estimate(model, xf, 3, seed).value;
    EXPECT_GE(a, 0.0);
    EXPECT_EQ(a, jacobian_frob_estimate(model, xf, 3, seed).value);
    EXPECT_GE(ams_frob_estimate(model, xf, 3, seed).value, 0.0);
  }
  EXPECT_THROW(jacobian_frob_estimate(model, xf, 0, 0), ConfigError);
}

TEST(Bound, ConstantLogitModelIsZeroOnBothSides) {
  const auto model = Model<double>::zeros(mlp_config({4, 3}));
  const auto r = verify_prop31(model, as_tensor<double>({0.1, 0.2, 0.3, 0.4}));
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(Bound, SingleClassIsEquality) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto model = Model<double>::build(mlp_config({5, 8, 1}), seed);
    Rng rng(seed);
    const auto r = verify_prop31(model, as_tensor<double>(random_point(rng, 5)));
    EXPECT_EQ(r.lhs, r.rhs);
    EXPECT_TRUE(r.holds);
  }
}

TEST(Bound, LinearModelMatchesClosedForm) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto o = LinearOracle::random(rng, 5, 3, 2.0);
    const auto x = random_point(rng, 5);
    const auto r = verify_prop31(o.model<double>(), as_tensor<double>(x));
    double lhs = 0.0;
    for (double g : o.lse_grad(x)) lhs += g * g;
    const auto p = o.probs(x);
    double rhs = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> e(3, 0.0);
      e[c] = p[c];
      rhs += projected_sq(o, e);
    }
    rhs *= 3.0;
    EXPECT_NEAR(r.lhs, lhs, 1e-10 * (1 + lhs));
    EXPECT_NEAR(r.rhs, rhs, 1e-10 * (1 + rhs));
    EXPECT_TRUE(r.holds);
  }
}

TEST(Bound, HoldsOnThousandRandomCases) {
  Rng rng(11);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 2 + rng.below(6), k = 2 + rng.below(5), h = 2 + rng.below(10);
    const auto model = Model<double>::build(mlp_config({d, h, k}), rng.next());
    const auto r = verify_prop31(model, as_tensor<double>(random_point(rng, d)));
    if (!r.holds) ++failures;
    EXPECT_GE(r.lhs, 0.0);
  }
  EXPECT_EQ(failures, 0);
}

TEST(JointLoss, ZeroLambdaIsPlainCrossEntropy) {
  const auto model = Model<double>::build(mlp_config({4, 6, 3}), 2);
  Rng rng(8);
  const auto x = random_tensor(rng, {5, 4}, 0.0, 1.0);
  const std::vector<std::size_t> y{0, 1, 2, 1, 0};
  const double ce = cross_entropy_sum(model.forward(x), y).item();
  for (auto mode : {DefenseMode::none, DefenseMode::adversarial_training, DefenseMode::jacobian_reg,
                    DefenseMode::ams_reg}) {
    EXPECT_EQ(joint_loss(model, x, y, regularizer(mode, 0.0), 1).item(), ce);
  }
}

TEST(JointLoss, ZeroModelIsBatchTimesLogK) {
  const auto model = Model<double>::zeros(mlp_config({4, 6, 5}));
  Rng rng(9);
  const auto x = random_tensor(rng, {7, 4}, 0.0, 1.0);
  const std::vector<std::size_t> y{0, 1, 2, 3, 4, 0, 1};
  for (auto mode : {DefenseMode::jacobian_reg, DefenseMode::ams_reg}) {
    EXPECT_NEAR(joint_loss(model, x, y, regularizer(mode, 1.0, 3), 2).item(), 7 * std::log(5.0), 1e-12);
  }
}

TEST(JointLoss, TwoSampleBatchMatchesManualAssembly) {
  Rng rng(12);
  const auto o = LinearOracle::random(rng, 3, 4);
  const auto model = o.model<double>();
  const std::vector<std::vector<double>> xs{random_point(rng, 3), random_point(rng, 3)};
  const std::vector<std::size_t> ys{2, 0};
  std::vector<double> flat(xs[0]);
  flat.insert(flat.end(), xs[1].begin(), xs[1].end());
  const auto x = as_tensor<double>(flat, {2, 3});
  const double lambda = 0.7;
  const std::uint64_t seed = 33;
  for (auto mode : {DefenseMode::jacobian_reg, DefenseMode::ams_reg}) {
    Rng draws(seed);
    double penalty = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      auto v = unit_sphere(draws, 4);
      if (mode == DefenseMode::ams_reg) {
        const auto p = o.probs(xs[i]);
        for (std::size_t c = 0; c < 4; ++c) v[c] *= p[c];
      }
      penalty += 4.0 * projected_sq(o, v);
    }
    const double expected = oracle_ce_sum(o, xs, ys) + lambda / 2.0 * (penalty / 2.0);
    EXPECT_NEAR(joint_loss(model, x, ys, regularizer(mode, lambda), seed).item(), expected, 1e-12);
  }
}

namespace {

// Central differences over the parameters listed in `coords` (flat indices).
double parameter_gradcheck(Model<double> model, const Tensor<double>& x, const std::vector<std::size_t>& y,
                           const DefenseConfig& defense, const std::vector<std::size_t>& coords) {
  for (auto& p : model.parameters()) p.zero_grad();
  backward(joint_loss(model, x, y, defense, 5));
  std::vector<double> analytic;
  for (const auto& p : model.parameters()) {
    const auto g = p.grad();
    for (std::size_t i = 0; i < p.numel(); ++i) analytic.push_back(g ? g->values()[i] : 0.0);
  }
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t flat : coords) {
    std::size_t t = 0, off = flat;
    while (off >= model.parameters()[t].numel()) off -= model.parameters()[t++].numel();
    auto values = model.parameters()[t].mutable_values();
    const double saved = values[off];
    values[off] = saved + h;
    const double up = joint_loss(model, x, y, defense, 5).item();
    values[off] = saved - h;
    const double down = joint_loss(model, x, y, defense, 5).item();
    values[off] = saved;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic[flat] - numeric) / (std::abs(analytic[flat]) + std::abs(numeric) + 1e-6));
  }
  return worst;
}

}  // namespace

TEST(JointLoss, ParameterGradientMatchesFiniteDifferences) {
  const auto model = Model<double>::build(mlp_config({3, 8, 3}), 4);
  ASSERT_LE(model.parameter_count(), 200u);
  Rng rng(13);
  const auto x = random_tensor(rng, {4, 3}, 0.0, 1.0);
  const std::vector<std::size_t> y{0, 2, 1, 2};
  std::vector<std::size_t> all(model.parameter_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (auto mode : {DefenseMode::jacobian_reg, DefenseMode::ams_reg}) {
    for (std::size_t n_proj : {1u, 3u}) {
      EXPECT_LT(parameter_gradcheck(model, x, y, regularizer(mode, 0.8, n_proj), all), 1e-3)
          << defense_mode_name(mode) << " n_proj " << n_proj;
    }
  }
}

TEST(JointLoss, ConvolutionalParameterGradientMatchesFiniteDifferences) {
  const auto model = Model<double>::build(lenet_small_config({1, 16, 16}, 3), 6);
  Rng rng(14);
  const auto x = random_tensor(rng, {2, 1, 16, 16}, 0.0, 1.0);
  const std::vector<std::size_t> y{1, 2};
  std::vector<std::size_t> coords;
  for (int i = 0; i < 40; ++i) coords.push_back(rng.below(model.parameter_count()));
  EXPECT_LT(parameter_gradcheck(model, x, y, regularizer(DefenseMode::ams_reg, 1.0), coords), 1e-3);
}

TEST(JointLoss, DetachedProbabilitiesChangeTheGradient) {
  auto model = Model<double>::build(mlp_config({3, 8, 3}), 4);
  Rng rng(15);
  const auto x = random_tensor(rng, {4, 3}, 0.0, 1.0);
  const std::vector<std::size_t> y{0, 2, 1, 2};
  auto full = regularizer(DefenseMode::ams_reg, 1.0);
  auto detached = full;
  detached.detach_probs = true;
  EXPECT_EQ(joint_loss(model, x, y, full, 1).item(), joint_loss(model, x, y, detached, 1).item());
  backward(joint_loss(model, x, y, full, 1));
  const auto g_full = *model.parameters()[0].grad();
  for (auto& p : model.parameters()) p.zero_grad();
  backward(joint_loss(model, x, y, detached, 1));
  const auto g_detached = *model.parameters()[0].grad();
  double diff = 0.0;
  for (std::size_t i = 0; i < g_full.numel(); ++i) diff += std::abs(g_full.at(i) - g_detached.at(i));
  EXPECT_GT(diff, 1e-8);
}

TEST(Optimizer, HeavyBallUpdate) {
  std::vector<Tensor<double>> params{Tensor<double>({2}, {1.0, -2.0}, true)};
  SgdMomentum<double> opt(0.9);
  std::vector<double> theta{1.0, -2.0}, v{0.0, 0.0};
  for (int step = 0; step < 3; ++step) {
    backward(sum(square(params[0])));
    opt.step(params, 0.1);
    for (std::size_t i = 0; i < 2; ++i) {
      v[i] = 0.9 * v[i] + 2 * theta[i];
      theta[i] -= 0.1 * v[i];
      EXPECT_NEAR(params[0].at(i), theta[i], 1e-15);
    }
    EXPECT_FALSE(params[0].grad().has_value() && params[0].grad()->at(0) != 0.0);
  }
}

TEST(Config, LearningRateSchedule) {
  TrainConfig c;
  EXPECT_EQ(c.epochs, 60u);
  EXPECT_EQ(c.lr_at(1), c.learning_rate);
  EXPECT_EQ(c.lr_at(30), c.learning_rate);
  EXPECT_NEAR(c.lr_at(31), c.learning_rate * 0.1, 1e-15);
  EXPECT_NEAR(c.lr_at(46), c.learning_rate * 0.01, 1e-15);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ValidationErrors) {
  TrainConfig c;
  c.lr_decay_epochs = {45, 30};
  EXPECT_THROW(c.validate(), ConfigError);
  c.lr_decay_epochs = {30, 61};
  EXPECT_THROW(c.validate(), ConfigError);
  c.lr_decay_epochs = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  DefenseConfig d;
  d.lambda = -1;
  EXPECT_THROW(d.validate(), ConfigError);
  d.lambda = 1;
  d.n_proj = 0;
  EXPECT_THROW(d.validate(), ConfigError);
  EXPECT_EQ(DefenseConfig::default_training_attack().iters, 10u);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig t;
  t.epochs = 12;
  t.lr_decay_epochs = {4, 9};
  t.seed = 77;
  const auto t2 = train_config_from_json(train_config_to_json(t));
  EXPECT_EQ(train_config_to_json(t2), train_config_to_json(t));
  DefenseConfig d = regularizer(DefenseMode::ams_reg, 0.25, 4);
  d.detach_probs = true;
  EXPECT_EQ(defense_to_json(defense_from_json(defense_to_json(d))), defense_to_json(d));
  EXPECT_THROW(train_config_from_json({{"epoch", 3}}), ConfigError);
  EXPECT_THROW(defense_from_json({{"mode", "trades"}}), ConfigError);
  const auto scaled = train_config_from_json({{"epochs", 20}});
  EXPECT_EQ(scaled.lr_decay_epochs, (std::vector<std::size_t>{10, 15}));
  const auto at = defense_from_json({{"mode", "adversarial_training"}, {"attack", {{"eps", 0.1}}}});
  EXPECT_EQ(at.attack.iters, 10u);
  EXPECT_EQ(at.attack.eps, 0.1);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  const auto model = Model<double>::build(mlp_config({2, 8, 2}), 1);
  const auto result = train(model, separable_blobs(1), short_schedule(0, 1), DefenseConfig{});
  EXPECT_EQ(flat_params(result.model), flat_params(model));
  EXPECT_TRUE(result.log.empty());
}

TEST(Train, SeparableBlobsReachNearPerfectAccuracy) {
  const auto data = separable_blobs(2);
  std::vector<EpochMetrics> seen;
  const auto result = train(Model<double>::build(mlp_config({2, 16, 2}), 3), data, short_schedule(50, 4),
                            DefenseConfig{}, std::nullopt, [&](const EpochMetrics& m) { seen.push_back(m); });
  ASSERT_EQ(result.log.size(), 50u);
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_GE(result.log.back().clean_acc, 0.99);
  EXPECT_GE(clean_accuracy(result.model, separable_blobs(2, Split::test)), 0.99);
  EXPECT_LT(result.log.back().loss, result.log.front().loss);
  EXPECT_EQ(result.log.front().epoch, 1u);
  EXPECT_FALSE(result.log.front().phi.has_value());
  const auto j = epoch_to_json(result.log.back());
  EXPECT_TRUE(j.contains("loss") && j.contains("clean_acc") && j.contains("lr") && !j.contains("phi"));
}

TEST(Train, DeterministicGivenSeed) {
  const auto data = separable_blobs(3);
  const auto model = Model<float>::build(mlp_config({2, 8, 2}), 5);
  const auto defense = regularizer(DefenseMode::ams_reg, 0.5);
  const auto a = train(model, data, short_schedule(3, 6), defense);
  const auto b = train(model, data, short_schedule(3, 6), defense);
  EXPECT_EQ(a.model.checksum(), b.model.checksum());
  EXPECT_NE(a.model.checksum(), train(model, data, short_schedule(3, 7), defense).model.checksum());
}

TEST(Train, DivergenceReportsEpoch) {
  auto config = short_schedule(3, 1);
  config.learning_rate = 1e30;
  try {
    train(Model<float>::build(mlp_config({2, 8, 2}), 1), separable_blobs(1), config, DefenseConfig{});
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_LE(e.epoch(), 3);
  }
}

TEST(Train, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(train(Model<double>::build(mlp_config({3, 2}), 1), separable_blobs(1), short_schedule(1, 1),
                     DefenseConfig{}),
               DimensionError);
}

TEST(Adversarial, ZeroEpsStepEqualsPlainStep) {
  const auto data = separable_blobs(4);
  const std::vector<std::size_t> idx{0, 5, 10, 150, 199};
  const auto x = data.batch<double>(idx);
  const auto y = data.batch_labels(idx);
  auto a = Model<double>::build(mlp_config({2, 8, 2}), 2);
  auto b = a;
  SgdMomentum<double> opt_a(0.9), opt_b(0.9);
  AttackConfig attack = DefenseConfig::default_training_attack();
  attack.eps = 0.0;
  for (int step = 0; step < 3; ++step) {
    const double la = adversarial_train_step(a, opt_a, x, y, attack, false, 0.1);
    const double lb = train_step(b, opt_b, x, y, DefenseConfig{}, 0.1, 0);
    EXPECT_EQ(la, lb);
  }
  EXPECT_EQ(flat_params(a), flat_params(b));
}

TEST(Adversarial, ConstantLogitModelSeesCleanBatch) {
  const auto data = separable_blobs(5);
  const std::vector<std::size_t> idx{1, 2, 101, 102};
  const auto x = data.batch<double>(idx);
  const auto y = data.batch_labels(idx);
  const auto zero = Model<double>::zeros(mlp_config({2, 4, 2}));
  const auto adv = run_attack(zero, x, y, DefenseConfig::default_training_attack());
  EXPECT_EQ(std::vector<double>(adv.values().begin(), adv.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
  auto a = zero, b = zero;
  SgdMomentum<double> opt_a(0.9), opt_b(0.9);
  adversarial_train_step(a, opt_a, x, y, DefenseConfig::default_training_attack(), false, 0.1);
  train_step(b, opt_b, x, y, DefenseConfig{}, 0.1, 0);
  EXPECT_EQ(flat_params(a), flat_params(b));
}

TEST(Adversarial, MixCleanTrainsOnBothCopies) {
  const auto data = separable_blobs(6);
  const std::vector<std::size_t> idx{3, 4, 103};
  const auto x = data.batch<double>(idx);
  const auto y = data.batch_labels(idx);
  auto a = Model<double>::build(mlp_config({2, 8, 2}), 3);
  auto b = a;
  SgdMomentum<double> opt_a(0.0), opt_b(0.0);
  AttackConfig attack = DefenseConfig::default_training_attack();
  attack.eps = 0.0;
  // With eps = 0 both halves are the clean batch, so the mean loss is unchanged.
  EXPECT_NEAR(adversarial_train_step(a, opt_a, x, y, attack, true, 0.1),
              train_step(b, opt_b, x, y, DefenseConfig{}, 0.1, 0), 1e-12);
  const auto pa = flat_params(a), pb = flat_params(b);
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12);
}

TEST(Flatness, AmsRegularizedRunIsFlatterThanUndefended) {
  const auto data = separable_blobs(7);
  FlatnessProbe probe{subset(data, 40, 1), 2, GridSpec{0.1, 2}, 3};
  const auto model = Model<double>::build(mlp_config({2, 16, 2}), 8);
  const auto none = train(model, data, short_schedule(20, 9), DefenseConfig{}, probe);
  const auto ams = train(model, data, short_schedule(20, 9), regularizer(DefenseMode::ams_reg, 0.5), probe);
  ASSERT_TRUE(none.log.back().phi && ams.log.back().phi);
  EXPECT_GT(*ams.log.back().phi, *none.log.back().phi);
}

TEST(Flatness, NonDecreasingInLambda) {
  const auto data = separable_blobs(8);
  FlatnessProbe probe{subset(data, 40, 2), 2, GridSpec{0.1, 2}, 4};
  const auto model = Model<double>::build(mlp_config({2, 16, 2}), 10);
  std::vector<double> phis;
  for (double lambda : {0.0, 0.1, 1.0}) {
    const auto r = train(model, data, short_schedule(20, 11), regularizer(DefenseMode::ams_reg, lambda), probe);
    phis.push_back(*r.log.back().phi);
  }
  EXPECT_LE(phis[0], phis[1]);
  EXPECT_LE(phis[1], phis[2]);
}
