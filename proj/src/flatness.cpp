#include "amsreg/flatness.hpp"

#include "amsreg/errors.hpp"
#include "amsreg/likelihood.hpp"
#include "amsreg/ops.hpp"
#include "amsreg/rng.hpp"
#include "amsreg/schema.hpp"

namespace amsreg {

namespace {

constexpr std::size_t kEvalChunk = 512;

}  // namespace

std::vector<DirectionPair> flatness_planes(std::size_t dim, std::size_t n_planes, std::uint64_t seed) {
  if (n_planes < 1) throw ConfigError("flatness needs n_planes >= 1");
  std::vector<DirectionPair> planes;
  planes.reserve(n_planes);
  for (std::size_t j = 0; j < n_planes; ++j) {
    planes.push_back(sample_direction_pair(dim, std::nullopt, derive_seed(seed, j)));
  }
  return planes;
}

template <typename T>
double phi_flatness_at(const Model<T>& model, const Tensor<T>& x,
                       std::span<const DirectionPair> planes, std::span<const GridPoint> points) {
  if (points.empty()) throw ConfigError("flatness grid has no points");
  if (planes.empty()) throw ConfigError("flatness needs n_planes >= 1");
  const Tensor<T> sample = x.shape() == model.input_shape() ? x : reshape(x.detach(), model.input_shape());
  double total = 0.0;
  for (const DirectionPair& pair : planes) {
    LandscapePlane plane;
    plane.sample_shape = model.input_shape();
    plane.center.assign(sample.values().begin(), sample.values().end());
    plane.d = pair.d;
    plane.d_perp = pair.d_perp;
    for (std::size_t begin = 0; begin < points.size(); begin += kEvalChunk) {
      const std::size_t n = std::min(kEvalChunk, points.size() - begin);
      for (double s : ams_scores(model, plane.batch<T>(points.subspan(begin, n)))) total += s;
    }
  }
  return total / static_cast<double>(planes.size() * points.size());
}

template <typename T>
double phi_flatness(const Model<T>& model, const Tensor<T>& x, std::size_t n_planes,
                    const GridSpec& grid, std::uint64_t seed) {
  grid.validate();
  const auto planes = flatness_planes(model.input_dim(), n_planes, seed);
  const auto points = grid.points();
  return phi_flatness_at(model, x, std::span<const DirectionPair>(planes), points);
}

template <typename T>
FlatnessReport dataset_flatness(const Model<T>& model, const Dataset& data, std::size_t n_planes,
                                const GridSpec& grid, std::uint64_t seed) {
  if (data.empty()) throw InputError("dataset_flatness: empty dataset");
  grid.validate();
  const auto planes = flatness_planes(model.input_dim(), n_planes, seed);
  const auto points = grid.points();
  FlatnessReport r;
  r.n_planes = n_planes;
  r.grid = grid;
  r.seed = seed;
  r.sample_count = data.size();
  r.model_checksum = model.checksum();
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double phi =
        phi_flatness_at(model, data.sample<T>(i), std::span<const DirectionPair>(planes), points);
    r.phi_per_sample.push_back(phi);
    total += phi;
  }
  r.Phi = total / static_cast<double>(data.size());
  return r;
}

nlohmann::json flatness_to_json(const FlatnessReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"phi_per_sample", r.phi_per_sample},
          {"Phi", r.Phi},
          {"n_planes", r.n_planes},
          {"grid", {{"eps_max", r.grid.eps_max}, {"resolution", r.grid.resolution}, {"points", r.grid.size()}}},
          {"seed", r.seed},
          {"sample_count", r.sample_count},
          {"model_checksum", r.model_checksum}};
}

#define AMSREG_INSTANTIATE(T)                                                                       \
  template double phi_flatness(const Model<T>&, const Tensor<T>&, std::size_t, const GridSpec&,     \
                               std::uint64_t);                                                      \
  template double phi_flatness_at(const Model<T>&, const Tensor<T>&, std::span<const DirectionPair>, \
                                  std::span<const GridPoint>);                                      \
  template FlatnessReport dataset_flatness(const Model<T>&, const Dataset&, std::size_t,            \
                                           const GridSpec&, std::uint64_t);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

}  // namespace amsreg
