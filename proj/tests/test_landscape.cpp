#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <string>

#include "amsreg/errors.hpp"
#include "amsreg/landscape.hpp"
#include "amsreg/likelihood.hpp"
#include "test_support.hpp"

using namespace amsreg;
using amsreg::testing::as_tensor;
using amsreg::testing::LinearOracle;
using amsreg::testing::random_point;
using amsreg::testing::random_tensor;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void expect_plane_invariants(const std::vector<double>& d, const std::vector<double>& dp) {
  EXPECT_LE(std::abs(dot(d, dp)), 1e-6 * norm(d) * norm(dp));
  EXPECT_NEAR(norm(dp), norm(d), 1e-6 * norm(d));
}

}  // namespace

TEST(Directions, OrthogonalSecondDrawIsKept) {
  const std::vector<double> d{1.0, 1.0}, c{1.0, -1.0};
  const auto p = orthogonal_partner(d, c);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR((*p)[0], 1.0, 1e-15);
  EXPECT_NEAR((*p)[1], -1.0, 1e-15);
  EXPECT_NEAR(norm(*p), std::sqrt(2.0), 1e-15);
}

TEST(Directions, ParallelDrawIsRejected) {
  const std::vector<double> d{1.0, -1.0, 1.0};
  EXPECT_FALSE(orthogonal_partner(d, std::vector<double>{-1.0, 1.0, -1.0}).has_value());
}

TEST(Directions, EntriesAreSignedAndInvariantsHold) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto pair = sample_direction_pair(2 + seed % 5, std::nullopt, seed);
    for (double v : pair.d) EXPECT_TRUE(v == 1.0 || v == -1.0);
    expect_plane_invariants(pair.d, pair.d_perp);
  }
}

TEST(Directions, SweepOverThousandSeedsAtFashionDimension) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto pair = sample_direction_pair(784, std::nullopt, seed);
    ASSERT_LE(std::abs(dot(pair.d, pair.d_perp)), 1e-6 * norm(pair.d) * norm(pair.d_perp)) << seed;
    ASSERT_NEAR(norm(pair.d_perp), norm(pair.d), 1e-6 * norm(pair.d)) << seed;
  }
}

TEST(Directions, DeterministicAndReferenceNormApplied) {
  const auto a = sample_direction_pair(10, std::nullopt, 3);
  const auto b = sample_direction_pair(10, std::nullopt, 3);
  EXPECT_EQ(a.d, b.d);
  EXPECT_EQ(a.d_perp, b.d_perp);
  const auto r = sample_direction_pair(10, 2.5, 3);
  EXPECT_NEAR(norm(r.d), 2.5, 1e-12);
  EXPECT_NEAR(norm(r.d_perp), 2.5, 1e-12);
  EXPECT_THROW(sample_direction_pair(1, std::nullopt, 0), ConfigError);
}

TEST(Neighborhood, ResolutionOneHasNinePointsIncludingCenter) {
  const GridSpec grid{0.1, 1};
  const auto pts = grid.points();
  ASSERT_EQ(pts.size(), 9u);
  EXPECT_EQ(pts[grid.center_index()].e1, 0.0);
  EXPECT_EQ(pts[grid.center_index()].e2, 0.0);
  EXPECT_EQ(grid.axis(), (std::vector<double>{-0.1, 0.0, 0.1}));
}

TEST(Neighborhood, DefaultGridMatchesAttackBudgetScale) {
  const GridSpec grid;
  EXPECT_DOUBLE_EQ(grid.eps_max, 8.0 / 255.0);
  EXPECT_EQ(grid.side(), 21u);
  EXPECT_EQ(grid.axis().front(), -8.0 / 255.0);
  EXPECT_EQ(grid.axis().back(), 8.0 / 255.0);
}

TEST(Neighborhood, CornerIsCenterPlusBothDirections) {
  Rng rng(1);
  const auto x = random_tensor(rng, {1, 4, 4}, 0.0, 1.0);
  const auto pair = sample_direction_pair(16, std::nullopt, 2);
  const double eps = 8.0 / 255.0;
  const auto plane = neighborhood(x, pair, GridSpec{eps, 3});
  const auto corner = plane.point({eps, eps});
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(corner[i], x.at(i) + eps * pair.d[i] + eps * pair.d_perp[i]);
  const auto batch = plane.batch<double>();
  EXPECT_EQ(batch.shape(), (Shape{49, 1, 4, 4}));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(batch.at(48 * 16 + i), corner[i]);
}

TEST(Neighborhood, PointsAreNotClipped) {
  const auto x = Tensor<double>::full({2}, 1.0);
  const auto plane = neighborhood(x, DirectionPair{{1.0, 1.0}, {1.0, -1.0}}, GridSpec{0.5, 1});
  const auto p = plane.point({0.5, 0.5});
  EXPECT_EQ(p[0], 2.0);
  EXPECT_EQ(p[1], 1.0);
}

TEST(Surface, ZeroModelIsFlat) {
  const auto model = Model<double>::zeros(mlp_config({6, 5, 3}));
  const auto x = Tensor<double>::full({6}, 0.4);
  const auto s = surface(model, neighborhood(x, sample_direction_pair(6, std::nullopt, 1), GridSpec{0.1, 2}));
  for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(Surface, CenterIsExactlyZero) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto config = seed % 2 ? lenet_small_config({1, 16, 16}, 4) : mlp_config({256, 12, 4});
    const auto model = Model<float>::build(config, seed);
    Rng rng(seed);
    std::vector<float> xv(256);
    for (float& v : xv) v = static_cast<float>(rng.uniform());
    const Tensor<float> x(config.input_shape, xv);
    const auto s = surface(model, neighborhood(x, sample_direction_pair(256, std::nullopt, seed), GridSpec{}));
    EXPECT_EQ(s.values[s.plane.grid.center_index()], 0.0);
    EXPECT_EQ(s.values.size(), 441u);
  }
}

TEST(Surface, LinearModelMatchesClosedFormDifferences) {
  Rng rng(3);
  const auto o = LinearOracle::random(rng, 5, 3, 2.0);
  const auto x = random_point(rng, 5);
  const auto pair = sample_direction_pair(5, std::nullopt, 4);
  const auto s = surface(o.model<double>(), neighborhood(as_tensor<double>(x), pair, GridSpec{0.3, 1}));
  const double base = o.lse(x);
  std::size_t k = 0;
  for (double e1 : {-0.3, 0.0, 0.3}) {
    for (double e2 : {-0.3, 0.0, 0.3}) {
      std::vector<double> xp(5);
      for (std::size_t i = 0; i < 5; ++i) xp[i] = x[i] + e1 * pair.d[i] + e2 * pair.d_perp[i];
      EXPECT_NEAR(s.values[k++], o.lse(xp) - base, 1e-12);
    }
  }
}

TEST(Surface, EqualsRelativeLikelihoodPerPoint) {
  const auto model = Model<double>::build(lenet_small_config({1, 16, 16}, 3), 5);
  Rng rng(5);
  const auto x = random_tensor(rng, {1, 16, 16}, 0.0, 1.0);
  const auto plane = neighborhood(x, sample_direction_pair(256, std::nullopt, 6), GridSpec{0.05, 2});
  const auto s = surface(model, plane);
  const auto pts = plane.grid.points();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto xp = as_tensor<double>(plane.point(pts[k]), {1, 16, 16});
    EXPECT_NEAR(s.values[k], relative_log_likelihood(model, xp, x), 1e-12);
  }
}

TEST(Surface, InvariantToUniformLogitShift) {
  const auto model = Model<double>::build(mlp_config({8, 6, 3}), 1);
  auto shifted = model;
  for (double& v : shifted.parameters().back().mutable_values()) v += 37.5;
  Rng rng(2);
  const auto x = random_tensor(rng, {8}, 0.0, 1.0);
  const auto plane = neighborhood(x, sample_direction_pair(8, std::nullopt, 3), GridSpec{0.1, 3});
  const auto a = surface(model, plane), b = surface(shifted, plane);
  for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-9);
}

TEST(Surface, SameSeedReproducesBitwise) {
  const auto model = Model<float>::build(mlp_config({8, 6, 3}), 1);
  const Tensor<float> x({8}, std::vector<float>(8, 0.25f));
  const auto a = surface(model, neighborhood(x, sample_direction_pair(8, std::nullopt, 9), GridSpec{}));
  const auto b = surface(model, neighborhood(x, sample_direction_pair(8, std::nullopt, 9), GridSpec{}));
  EXPECT_EQ(a.values, b.values);
}

TEST(FgsmPlane, ZeroModelGivesFlaggedZeroDirection) {
  const auto model = Model<double>::zeros(mlp_config({6, 4, 3}));
  const auto plane = fgsm_plane(model, Tensor<double>::full({6}, 0.5), 1, GridSpec{0.1, 2}, 4);
  EXPECT_TRUE(plane.zero_direction);
  EXPECT_EQ(plane.kind, DirectionKind::fgsm);
  for (double v : plane.d) EXPECT_EQ(v, 0.0);
  for (double v : surface(model, plane).values) EXPECT_EQ(v, 0.0);
}

TEST(FgsmPlane, DirectionIsLossGradientSignAndOrthogonal) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto o = LinearOracle::random(rng, 6, 3);
    const auto x = random_point(rng, 6);
    const std::size_t label = static_cast<std::size_t>(trial) % 3;
    const auto plane = fgsm_plane(o.model<double>(), as_tensor<double>(x), label, GridSpec{}, 11);
    const auto g = o.ce_grad(x, label);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(plane.d[i], g[i] > 0 ? 1.0 : -1.0);
    EXPECT_FALSE(plane.zero_direction);
    expect_plane_invariants(plane.d, plane.d_perp);
  }
  const auto model = Model<double>::build(lenet_small_config({1, 16, 16}, 3), 2);
  const auto plane = fgsm_plane(model, random_tensor(rng, {1, 16, 16}, 0.0, 1.0), 0, GridSpec{}, 1);
  expect_plane_invariants(plane.d, plane.d_perp);
  EXPECT_THROW(fgsm_plane(model, random_tensor(rng, {1, 16, 16}, 0.0, 1.0), 3, GridSpec{}, 1), InputError);
}

TEST(SurfaceStats, LineAndSurfaceVariance) {
  LandscapeSurface s;
  s.plane.grid = GridSpec{1.0, 1};
  s.values = {0, 1, 0, 2, 0, 2, 0, 1, 0};
  EXPECT_NEAR(line_variance(s, 0), 2.0 / 9.0, 1e-15);
  EXPECT_NEAR(line_variance(s, 1), 8.0 / 9.0, 1e-15);
  EXPECT_NEAR(surface_variance(s), 10.0 / 9.0 - (6.0 / 9.0) * (6.0 / 9.0), 1e-15);
}

TEST(Histogram, ZeroEpsGivesIdenticalSeries) {
  const auto model = Model<double>::build(mlp_config({3, 5, 2}), 0);
  BlobSpec spec;
  spec.dim = 3;
  const auto data = synthetic_blobs(spec);
  const auto h = likelihood_histogram(model, data, 0.0, 10, 1);
  EXPECT_EQ(h.clean_values, h.perturbed_values);
  EXPECT_EQ(h.clean_counts, h.perturbed_counts);
}

TEST(Histogram, ZeroModelIsConstantLogK) {
  const auto model = Model<double>::zeros(mlp_config({3, 4}));
  BlobSpec spec;
  spec.dim = 3;
  const auto h = likelihood_histogram(model, synthetic_blobs(spec), 8.0 / 255.0, 5, 1);
  for (double v : h.clean_values) EXPECT_NEAR(v, std::log(4.0), 1e-15);
  for (double v : h.perturbed_values) EXPECT_NEAR(v, std::log(4.0), 1e-15);
}

TEST(Histogram, CountsSumToSeriesLengthOnSharedEdges) {
  const auto model = Model<double>::build(mlp_config({4, 8, 3}), 2);
  BlobSpec spec;
  spec.dim = 4;
  spec.num_classes = 3;
  const auto data = synthetic_blobs(spec);
  const auto h = likelihood_histogram(model, data, 0.1, 7, 3);
  ASSERT_EQ(h.bin_edges.size(), 8u);
  EXPECT_EQ(std::accumulate(h.clean_counts.begin(), h.clean_counts.end(), std::size_t{0}), data.size());
  EXPECT_EQ(std::accumulate(h.perturbed_counts.begin(), h.perturbed_counts.end(), std::size_t{0}), data.size());
  for (double v : h.clean_values) {
    EXPECT_GE(v, h.bin_edges.front());
    EXPECT_LE(v, h.bin_edges.back());
  }
  const std::string csv = histogram_csv(h);
  EXPECT_EQ(csv.rfind("bin_lo,bin_hi,clean_count,perturbed_count\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Histogram, EmptyDatasetIsInputError) {
  const auto model = Model<double>::zeros(mlp_config({3, 4}));
  Dataset empty;
  empty.sample_shape = {3};
  EXPECT_THROW(likelihood_histogram(model, empty, 0.1, 5, 1), InputError);
}

TEST(Wasserstein, SortedAbsoluteDifferenceMean) {
  EXPECT_DOUBLE_EQ(wasserstein1(std::vector<double>{0, 1, 2}, std::vector<double>{2, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1(std::vector<double>{0, 0}, std::vector<double>{1, 3}), 2.0);
  EXPECT_THROW(wasserstein1(std::vector<double>{0}, std::vector<double>{1, 2}), InputError);
}

TEST(Export, CsvAndPpmLayout) {
  const auto model = Model<double>::build(mlp_config({4, 3}), 0);
  const auto x = Tensor<double>::full({4}, 0.5);
  const auto s = surface(model, neighborhood(x, sample_direction_pair(4, std::nullopt, 0), GridSpec{0.1, 2}));
  const std::string csv = surface_csv(s);
  EXPECT_EQ(csv.rfind("e1,e2,delta_log_p\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
  const Bytes ppm = surface_ppm(s, 3);
  const std::string header = "P6\n15 15\n255\n";
  ASSERT_GE(ppm.size(), header.size());
  EXPECT_EQ(std::string(ppm.begin(), ppm.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  EXPECT_EQ(ppm.size(), header.size() + 15 * 15 * 3);
}
