#include "amsreg/landscape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "amsreg/attacks.hpp"
#include "amsreg/errors.hpp"
#include "amsreg/likelihood.hpp"
#include "amsreg/ops.hpp"
#include "amsreg/rng.hpp"

namespace amsreg {

namespace {

constexpr std::size_t kMaxRedraws = 100;
constexpr std::size_t kEvalChunk = 512;

double norm_of(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

std::vector<double> rademacher_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.rademacher();
  return v;
}

double variance_of(std::span<const double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::vector<double> GridSpec::axis() const {
  std::vector<double> out(side());
  const auto r = static_cast<double>(resolution);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double k = static_cast<double>(i) - r;
    out[i] = resolution == 0 ? 0.0 : eps_max * k / r;
  }
  return out;
}

std::vector<GridPoint> GridSpec::points() const {
  const auto a = axis();
  std::vector<GridPoint> out;
  out.reserve(size());
  for (double e1 : a) {
    for (double e2 : a) out.push_back({e1, e2});
  }
  return out;
}

void GridSpec::validate() const {
  if (!std::isfinite(eps_max) || !(eps_max > 0.0)) throw ConfigError("grid eps_max must be finite and > 0");
  if (resolution > 4096) throw ConfigError("grid resolution too large");
}

std::string_view direction_kind_name(DirectionKind kind) {
  return kind == DirectionKind::fgsm ? "fgsm" : "random";
}

std::optional<std::vector<double>> orthogonal_partner(std::span<const double> d,
                                                      std::span<const double> candidate) {
  if (d.size() != candidate.size()) throw DimensionError("orthogonal_partner: length mismatch");
  const double dd = std::inner_product(d.begin(), d.end(), d.begin(), 0.0);
  std::vector<double> out(candidate.begin(), candidate.end());
  if (dd == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  const double coef = std::inner_product(d.begin(), d.end(), candidate.begin(), 0.0) / dd;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= coef * d[i];
  const double n = norm_of(out);
  if (n <= 1e-9 * norm_of(candidate)) return std::nullopt;
  const double s = std::sqrt(dd) / n;
  for (double& x : out) x *= s;
  return out;
}

DirectionPair sample_direction_pair(std::size_t dim, std::optional<double> reference_norm,
                                    std::uint64_t seed) {
  if (dim < 2) throw ConfigError("direction pair needs dim >= 2");
  if (reference_norm && !(*reference_norm > 0.0)) throw ConfigError("reference_norm must be > 0");
  Rng rng(seed);
  DirectionPair pair;
  pair.d = rademacher_vector(rng, dim);
  for (std::size_t attempt = 0; attempt < kMaxRedraws && pair.d_perp.empty(); ++attempt) {
    if (auto p = orthogonal_partner(pair.d, rademacher_vector(rng, dim))) pair.d_perp = std::move(*p);
  }
  if (pair.d_perp.empty()) throw NumericError("could not draw a direction orthogonal to d");
  if (reference_norm) {
    const double s = *reference_norm / norm_of(pair.d);
    for (double& x : pair.d) x *= s;
    for (double& x : pair.d_perp) x *= s;
  }
  return pair;
}

std::vector<double> LandscapePlane::point(GridPoint p) const {
  std::vector<double> out(center.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = center[i] + p.e1 * d[i] + p.e2 * d_perp[i];
  return out;
}

template <typename T>
Tensor<T> LandscapePlane::batch() const {
  const auto pts = grid.points();
  return batch<T>(pts);
}

template <typename T>
Tensor<T> LandscapePlane::batch(std::span<const GridPoint> points) const {
  if (points.empty()) throw ConfigError("landscape batch needs at least one grid point");
  std::vector<T> values;
  values.reserve(points.size() * center.size());
  for (const GridPoint& p : points) {
    for (double v : point(p)) values.push_back(static_cast<T>(v));
  }
  Shape s{points.size()};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  return Tensor<T>(s, std::move(values));
}

template <typename T>
LandscapePlane neighborhood(const Tensor<T>& x, const DirectionPair& directions, const GridSpec& grid) {
  grid.validate();
  if (directions.d.size() != x.numel() || directions.d_perp.size() != x.numel()) {
    throw DimensionError("neighborhood: direction length differs from input size");
  }
  LandscapePlane plane;
  plane.sample_shape = x.shape();
  plane.center.assign(x.values().begin(), x.values().end());
  plane.d = directions.d;
  plane.d_perp = directions.d_perp;
  plane.grid = grid;
  return plane;
}

template <typename T>
LandscapeSurface surface(const Model<T>& model, const LandscapePlane& plane) {
  if (plane.sample_shape != model.input_shape()) throw DimensionError("plane does not match the model input");
  const auto pts = plane.grid.points();
  std::vector<double> lse;
  lse.reserve(pts.size());
  for (std::size_t begin = 0; begin < pts.size(); begin += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, pts.size() - begin);
    const auto part = log_likelihoods(model, plane.batch<T>(std::span(pts).subspan(begin, n)));
    lse.insert(lse.end(), part.begin(), part.end());
  }
  LandscapeSurface s;
  s.plane = plane;
  const double ref = lse[plane.grid.center_index()];
  s.values.resize(lse.size());
  for (std::size_t i = 0; i < lse.size(); ++i) s.values[i] = lse[i] - ref;
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

template <typename T>
LandscapePlane fgsm_plane(const Model<T>& model, const Tensor<T>& x, std::size_t label,
                          const GridSpec& grid, std::uint64_t seed) {
  if (label >= model.num_classes()) throw InputError("fgsm_plane: label out of range");
  const Tensor<T> batch = as_batch(model, x);
  const Tensor<T> gradient = loss_input_gradient(model, batch, {label});
  const auto g = gradient.values();
  DirectionPair pair;
  pair.d.resize(g.size());
  bool any = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    pair.d[i] = g[i] > T(0) ? 1.0 : (g[i] < T(0) ? -1.0 : 0.0);
    any = any || pair.d[i] != 0.0;
  }
  Rng rng(seed);
  for (std::size_t attempt = 0; attempt < kMaxRedraws && pair.d_perp.empty(); ++attempt) {
    if (auto p = orthogonal_partner(pair.d, rademacher_vector(rng, g.size()))) pair.d_perp = std::move(*p);
  }
  if (pair.d_perp.empty()) throw NumericError("could not draw a direction orthogonal to the FGSM sign");
  const Tensor<T> sample = reshape(batch, model.input_shape()).detach();
  LandscapePlane plane = neighborhood(sample, pair, grid);
  plane.kind = DirectionKind::fgsm;
  plane.zero_direction = !any;
  return plane;
}

double surface_variance(const LandscapeSurface& s) { return variance_of(s.values); }

double line_variance(const LandscapeSurface& s, std::size_t axis) {
  if (axis > 1) throw DimensionError("line_variance axis must be 0 or 1");
  const std::size_t n = s.side(), mid = s.plane.grid.resolution;
  std::vector<double> line(n);
  for (std::size_t k = 0; k < n; ++k) line[k] = axis == 0 ? s.at(k, mid) : s.at(mid, k);
  return variance_of(line);
}

template <typename T>
LikelihoodHistogram likelihood_histogram(const Model<T>& model, const Dataset& data, double eps,
                                         std::size_t bins, std::uint64_t seed) {
  if (data.empty()) throw InputError("likelihood_histogram: empty dataset");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("histogram eps must be finite and >= 0");
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  LikelihoodHistogram h;
  h.eps = eps;
  Rng rng(seed);
  const std::size_t dim = data.sample_dim();
  for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
    std::vector<std::size_t> idx(std::min(kEvalChunk, data.size() - begin));
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor<T> clean = data.batch<T>(idx);
    std::vector<T> noisy(clean.values().begin(), clean.values().end());
    for (std::size_t i = 0; i < idx.size() * dim; ++i) noisy[i] += static_cast<T>(rng.uniform(-eps, eps));
    const auto c = log_likelihoods(model, clean);
    const auto p = log_likelihoods(model, Tensor<T>(clean.shape(), std::move(noisy)));
    h.clean_values.insert(h.clean_values.end(), c.begin(), c.end());
    h.perturbed_values.insert(h.perturbed_values.end(), p.begin(), p.end());
  }
  double lo = std::min(*std::min_element(h.clean_values.begin(), h.clean_values.end()),
                       *std::min_element(h.perturbed_values.begin(), h.perturbed_values.end()));
  double hi = std::max(*std::max_element(h.clean_values.begin(), h.clean_values.end()),
                       *std::max_element(h.perturbed_values.begin(), h.perturbed_values.end()));
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
    lo -= 0.5;
    hi += 0.5;
  }
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  h.bin_edges[bins] = hi;
  const auto bin_of = [&](double v) {
    const auto k = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    return std::min(k, bins - 1);
  };
  h.clean_counts.assign(bins, 0);
  h.perturbed_counts.assign(bins, 0);
  for (double v : h.clean_values) ++h.clean_counts[bin_of(v)];
  for (double v : h.perturbed_values) ++h.perturbed_counts[bin_of(v)];
  return h;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw InputError("wasserstein1 needs two non-empty series of equal length");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

std::string surface_csv(const LandscapeSurface& s) {
  std::string out = "e1,e2,delta_log_p\n";
  const auto pts = s.plane.grid.points();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    out += format_double(pts[k].e1) + "," + format_double(pts[k].e2) + "," + format_double(s.values[k]) + "\n";
  }
  return out;
}

Bytes surface_ppm(const LandscapeSurface& s, std::size_t cell) {
  static constexpr std::array<std::array<double, 3>, 9> kRamp{{{68, 1, 84},
                                                                {71, 44, 122},
                                                                {59, 81, 139},
                                                                {44, 113, 142},
                                                                {33, 144, 141},
                                                                {39, 173, 129},
                                                                {92, 200, 99},
                                                                {170, 220, 50},
                                                                {253, 231, 37}}};
  if (cell == 0) throw ConfigError("ppm cell size must be positive");
  const std::size_t n = s.side(), w = n * cell;
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(w) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + w * w * 3);
  const double span = s.max - s.min;
  for (std::size_t py = 0; py < w; ++py) {
    const std::size_t i = n - 1 - py / cell;
    for (std::size_t px = 0; px < w; ++px) {
      const double t = span > 0.0 ? (s.at(i, px / cell) - s.min) / span : 0.5;
      const double pos = t * static_cast<double>(kRamp.size() - 1);
      const std::size_t k = std::min(static_cast<std::size_t>(pos), kRamp.size() - 2);
      const double f = pos - static_cast<double>(k);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = kRamp[k][c] + f * (kRamp[k + 1][c] - kRamp[k][c]);
        out.push_back(static_cast<unsigned char>(std::lround(v)));
      }
    }
  }
  return out;
}

std::string histogram_csv(const LikelihoodHistogram& h) {
  std::string out = "bin_lo,bin_hi,clean_count,perturbed_count\n";
  for (std::size_t i = 0; i < h.clean_counts.size(); ++i) {
    out += format_double(h.bin_edges[i]) + "," + format_double(h.bin_edges[i + 1]) + "," +
           std::to_string(h.clean_counts[i]) + "," + std::to_string(h.perturbed_counts[i]) + "\n";
  }
  return out;
}

#define AMSREG_INSTANTIATE(T)                                                                       \
  template Tensor<T> LandscapePlane::batch<T>() const;                                              \
  template Tensor<T> LandscapePlane::batch<T>(std::span<const GridPoint>) const;                    \
  template LandscapePlane neighborhood(const Tensor<T>&, const DirectionPair&, const GridSpec&);    \
  template LandscapeSurface surface(const Model<T>&, const LandscapePlane&);                        \
  template LandscapePlane fgsm_plane(const Model<T>&, const Tensor<T>&, std::size_t,                \
                                     const GridSpec&, std::uint64_t);                               \
  template LikelihoodHistogram likelihood_histogram(const Model<T>&, const Dataset&, double,        \
                                                    std::size_t, std::uint64_t);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

}  // namespace amsreg
