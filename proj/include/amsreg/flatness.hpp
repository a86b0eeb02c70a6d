#pragma once

// Landscape flatness: phi(x) is the mean AMS score over every point of n
// random planes around x, and Phi is the mean of phi over a dataset. Both are
// <= 0; values closer to 0 mean a flatter log-likelihood landscape.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "amsreg/data.hpp"
#include "amsreg/landscape.hpp"
#include "amsreg/model.hpp"

namespace amsreg {

struct FlatnessReport {
  std::vector<double> phi_per_sample;
  double Phi = 0.0;
  std::size_t n_planes = 0;
  GridSpec grid;
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::string model_checksum;
};

// Plane j uses sample_direction_pair(dim, nullopt, derive_seed(seed, j)), so
// every sample of a dataset sees the same n planes.
std::vector<DirectionPair> flatness_planes(std::size_t dim, std::size_t n_planes, std::uint64_t seed);

template <typename T>
double phi_flatness(const Model<T>& model, const Tensor<T>& x, std::size_t n_planes,
                    const GridSpec& grid, std::uint64_t seed);

// phi over explicit planes and grid offsets. An empty point list is a
// ConfigError.
template <typename T>
double phi_flatness_at(const Model<T>& model, const Tensor<T>& x,
                       std::span<const DirectionPair> planes, std::span<const GridPoint> points);

template <typename T>
FlatnessReport dataset_flatness(const Model<T>& model, const Dataset& data, std::size_t n_planes,
                                const GridSpec& grid, std::uint64_t seed);

nlohmann::json flatness_to_json(const FlatnessReport& report);

}  // namespace amsreg
