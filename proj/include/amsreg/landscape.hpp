#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amsreg/bytes.hpp"
#include "amsreg/data.hpp"
#include "amsreg/model.hpp"

namespace amsreg {

struct GridPoint {
  double e1 = 0.0;
  double e2 = 0.0;
};

// Square grid over [-eps_max, eps_max]^2 with 2*resolution+1 points per side.
// resolution 0 is the centre alone.
struct GridSpec {
  double eps_max = 8.0 / 255.0;
  std::size_t resolution = 10;

  std::size_t side() const { return 2 * resolution + 1; }
  std::size_t size() const { return side() * side(); }
  std::size_t center_index() const { return resolution * side() + resolution; }
  // Axis values, ascending, with an exact 0 in the middle.
  std::vector<double> axis() const;
  // Row-major: point i * side + j is (axis[i], axis[j]).
  std::vector<GridPoint> points() const;
  // Throws ConfigError.
  void validate() const;
};

enum class DirectionKind { random, fgsm };

std::string_view direction_kind_name(DirectionKind kind);

struct DirectionPair {
  std::vector<double> d;
  std::vector<double> d_perp;
};

// Removes the d component from `candidate` and rescales it to ||d||. Returns
// nullopt when the candidate is (numerically) parallel to d. A zero d leaves
// the candidate with zero norm.
std::optional<std::vector<double>> orthogonal_partner(std::span<const double> d,
                                                      std::span<const double> candidate);

// d has +-1 entries; d_perp is a second +-1 draw made orthogonal to d and
// rescaled to ||d||. With reference_norm both are rescaled to that norm.
DirectionPair sample_direction_pair(std::size_t dim, std::optional<double> reference_norm,
                                    std::uint64_t seed);

struct LandscapePlane {
  Shape sample_shape;
  std::vector<double> center;
  std::vector<double> d;
  std::vector<double> d_perp;
  GridSpec grid;
  DirectionKind kind = DirectionKind::random;
  // Set when an FGSM direction came out all zero.
  bool zero_direction = false;

  std::vector<GridPoint> eps_grid() const { return grid.points(); }
  // x + e1 d + e2 d_perp, not clipped to [0,1].
  std::vector<double> point(GridPoint p) const;
  // All grid points stacked as [G, sample_shape...].
  template <typename T>
  Tensor<T> batch() const;
  template <typename T>
  Tensor<T> batch(std::span<const GridPoint> points) const;
};

template <typename T>
LandscapePlane neighborhood(const Tensor<T>& x, const DirectionPair& directions, const GridSpec& grid);

struct LandscapeSurface {
  LandscapePlane plane;
  // Row-major side x side matrix of log p(x') - log p(x).
  std::vector<double> values;
  double min = 0.0;
  double max = 0.0;

  std::size_t side() const { return plane.grid.side(); }
  double at(std::size_t i, std::size_t j) const { return values[i * side() + j]; }
};

template <typename T>
LandscapeSurface surface(const Model<T>& model, const LandscapePlane& plane);

// d = sign of the input gradient of the cross-entropy at (x, label).
template <typename T>
LandscapePlane fgsm_plane(const Model<T>& model, const Tensor<T>& x, std::size_t label,
                          const GridSpec& grid, std::uint64_t seed);

// Population variance of all surface values.
double surface_variance(const LandscapeSurface& s);
// Population variance along the line through the centre: axis 0 varies e1
// (the d direction), axis 1 varies e2.
double line_variance(const LandscapeSurface& s, std::size_t axis);

struct LikelihoodHistogram {
  std::vector<double> clean_values;
  std::vector<double> perturbed_values;
  std::vector<double> bin_edges;
  std::vector<std::size_t> clean_counts;
  std::vector<std::size_t> perturbed_counts;
  double eps = 0.0;
};

// Log-likelihoods of each sample and of the sample plus uniform l-inf noise of
// radius eps, binned on shared edges.
template <typename T>
LikelihoodHistogram likelihood_histogram(const Model<T>& model, const Dataset& data, double eps,
                                         std::size_t bins, std::uint64_t seed);

// Wasserstein-1 distance between two equally sized empirical distributions.
double wasserstein1(std::span<const double> a, std::span<const double> b);

// Rows of e1,e2,delta_log_p.
std::string surface_csv(const LandscapeSurface& s);
// Binary P6 heatmap, `cell` pixels per grid point, min..max mapped onto a
// viridis-like ramp. Row 0 of the image is the largest e1.
Bytes surface_ppm(const LandscapeSurface& s, std::size_t cell = 8);
// Rows of bin_lo,bin_hi,clean_count,perturbed_count.
std::string histogram_csv(const LikelihoodHistogram& h);

}  // namespace amsreg
