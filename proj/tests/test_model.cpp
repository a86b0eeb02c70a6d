#include <gtest/gtest.h>

#include <fstream>

#include "amsreg/checkpoint.hpp"
#include "amsreg/errors.hpp"
#include "amsreg/fileio.hpp"
#include "amsreg/gradcheck.hpp"
#include "amsreg/model.hpp"
#include "amsreg/ops.hpp"
#include "test_support.hpp"

using namespace amsreg;
using amsreg::testing::naive_matmul;
using amsreg::testing::random_tensor;
using amsreg::testing::TempDir;

namespace {

template <typename T>
std::vector<T> flat_params(const Model<T>& m) {
  std::vector<T> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.values().begin(), p.values().end());
  return out;
}

Tensor<double> random_batch(Rng& rng, std::size_t b, const Shape& sample) {
  Shape s{b};
  s.insert(s.end(), sample.begin(), sample.end());
  return random_tensor(rng, s, 0.0, 1.0);
}

}  // namespace

TEST(Build, SameSeedIsBitwiseIdentical) {
  const auto config = mlp_config({2, 16, 2});
  const auto a = Model<double>::build(config, 7);
  const auto b = Model<double>::build(config, 7);
  EXPECT_EQ(flat_params(a), flat_params(b));
  EXPECT_EQ(a.checksum(), b.checksum());
  EXPECT_NE(flat_params(Model<double>::build(config, 8)), flat_params(a));
}

TEST(Build, LenetSmallOnFashionShapeGivesTenLogits) {
  const auto model = Model<float>::build(lenet_small_config({1, 28, 28}, 10), 1);
  Rng rng(2);
  std::vector<float> x(28 * 28);
  for (float& v : x) v = static_cast<float>(rng.uniform());
  const auto logits = model.forward(Tensor<float>({1, 1, 28, 28}, x));
  EXPECT_EQ(logits.shape(), (Shape{1, 10}));
}

TEST(Build, MlpParameterCountMatchesClosedForm) {
  const auto model = Model<float>::build(mlp_config({784, 128, 10}), 0);
  EXPECT_EQ(model.parameter_count(), 784u * 128 + 128 + 128 * 10 + 10);
  EXPECT_EQ(model.parameter_count(), 101770u);
}

TEST(Build, UnknownPresetIsConfigError) {
  ArchitectureConfig c;
  c.preset = "resnet18";
  c.input_shape = {3, 32, 32};
  c.num_classes = 10;
  EXPECT_THROW(Model<float>::build(c, 0), ConfigError);
  EXPECT_THROW(Model<float>::build(lenet_small_config({1, 6, 6}, 10), 0), ConfigError);
}

TEST(Build, HeUniformBoundsAndZeroBias) {
  const auto model = Model<double>::build(mlp_config({50, 20, 3}), 4);
  const double bound0 = std::sqrt(6.0 / 50.0);
  const double bound1 = std::sqrt(6.0 / 20.0);
  for (double v : model.parameters()[0].values()) EXPECT_LE(std::abs(v), bound0);
  for (double v : model.parameters()[2].values()) EXPECT_LE(std::abs(v), bound1);
  for (double v : model.parameters()[1].values()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(model.parameters_finite());
}

TEST(Forward, ZeroModelGivesZeroLogits) {
  const auto model = Model<double>::zeros(lenet_small_config({1, 16, 16}, 4));
  Rng rng(3);
  const auto logits = model.forward(random_batch(rng, 3, {1, 16, 16}));
  EXPECT_EQ(logits.shape(), (Shape{3, 4}));
  for (double v : logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, SingleDenseLayerMatchesMatrixProduct) {
  auto model = Model<double>::build(mlp_config({5, 3}), 9);
  Rng rng(4);
  for (double& v : model.parameters()[1].mutable_values()) v = rng.uniform(-1, 1);
  const auto x = random_batch(rng, 4, {5});
  const auto logits = model.forward(x);
  const std::vector<double> xv(x.values().begin(), x.values().end());
  const auto& w = model.parameters()[0];
  const std::vector<double> wv(w.values().begin(), w.values().end());
  auto expected = naive_matmul(xv, wv, 4, 5, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) expected[i * 3 + j] += model.parameters()[1].at(j);
  }
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(logits.at(i), expected[i], 1e-12);
}

TEST(Forward, BatchEqualsStackedSingles) {
  for (const auto& config : {mlp_config({6, 8, 3}), lenet_small_config({2, 16, 16}, 3)}) {
    const auto model = Model<double>::build(config, 5);
    Rng rng(6);
    const auto batch = random_batch(rng, 5, config.input_shape);
    const auto all = model.forward(batch);
    const std::size_t d = shape_numel(config.input_shape);
    for (std::size_t i = 0; i < 5; ++i) {
      std::vector<double> xi(batch.values().begin() + static_cast<std::ptrdiff_t>(i * d),
                             batch.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
      Shape s{1};
      s.insert(s.end(), config.input_shape.begin(), config.input_shape.end());
      const auto single = model.forward(Tensor<double>(s, xi));
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(all.at(i * 3 + k), single.at(k), 1e-6);
    }
  }
}

TEST(Forward, WrongShapeIsDimensionError) {
  const auto model = Model<double>::build(mlp_config({4, 2}), 0);
  EXPECT_THROW(model.forward(Tensor<double>::zeros({2, 5})), DimensionError);
  EXPECT_THROW(model.forward(Tensor<double>::zeros({4})), DimensionError);
}

TEST(Forward, InputGradientMatchesFiniteDifferences) {
  for (const auto& config : {mlp_config({7, 9, 4}), lenet_small_config({1, 16, 16}, 4)}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto model = Model<double>::build(config, seed);
      Rng rng(100 + seed);
      const auto weights = random_tensor(rng, {2, 4});
      const auto x = random_batch(rng, 2, config.input_shape);
      const auto result = finite_diff_check(
          [&](const Tensor<double>& in) { return sum(mul(model.forward(in), weights)); }, x);
      EXPECT_LT(result.max_relative_error, 1e-4) << config.preset << " seed " << seed;
    }
  }
}

TEST(Forward, CastPreservesValuesWithinPrecision) {
  const auto high = Model<double>::build(mlp_config({3, 4, 2}), 1);
  const auto standard = high.cast<float>();
  const auto back = standard.cast<double>();
  EXPECT_EQ(standard.cast<float>().checksum(), standard.checksum());
  const auto a = flat_params(high), b = flat_params(back);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-7);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  TempDir dir("ckpt");
  const auto f32 = Model<float>::build(lenet_small_config({1, 16, 16}, 5), 3);
  const auto f64 = Model<double>::build(mlp_config({4, 6, 3}), 3);
  save_checkpoint(f32, dir / "a.ckpt");
  save_checkpoint(f64, dir / "b.ckpt");
  const auto a = std::get<Model<float>>(load_checkpoint(dir / "a.ckpt"));
  const auto b = std::get<Model<double>>(load_checkpoint(dir / "b.ckpt"));
  EXPECT_EQ(flat_params(a), flat_params(f32));
  EXPECT_EQ(flat_params(b), flat_params(f64));
  EXPECT_EQ(a.config(), f32.config());
  EXPECT_EQ(model_checksum(AnyModel(b)), f64.checksum());
  EXPECT_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
}

TEST(Checkpoint, AnyFlippedByteIsCorruption) {
  const auto model = Model<double>::build(mlp_config({3, 4, 2}), 2);
  const Bytes good = encode_checkpoint(model);
  EXPECT_NO_THROW(decode_checkpoint(good));
  for (std::size_t pos = 0; pos < good.size(); pos += 7) {
    Bytes bad = good;
    bad[pos] ^= 0x20;
    EXPECT_THROW(decode_checkpoint(bad), CorruptionError) << "byte " << pos;
  }
  EXPECT_THROW(decode_checkpoint(Bytes(good.begin(), good.end() - 1)), CorruptionError);
  EXPECT_THROW(decode_checkpoint(Bytes{}), CorruptionError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), IoError);
}
