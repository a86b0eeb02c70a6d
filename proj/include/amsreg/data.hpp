#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amsreg/tensor.hpp"

namespace amsreg {

enum class Split { train, test };

std::string_view split_name(Split s);

// Labelled samples with every input element in [0, 1]. Inputs are stored
// contiguously, one sample of shape `sample_shape` after another.
struct Dataset {
  std::string name;
  Split split = Split::train;
  Shape sample_shape;
  std::size_t num_classes = 0;
  std::vector<double> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t sample_dim() const { return shape_numel(sample_shape); }
  std::span<const double> input(std::size_t i) const;

  // Stacks the selected samples into [B, sample_shape...].
  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> indices) const;
  template <typename T>
  Tensor<T> sample(std::size_t i) const;
  std::vector<std::size_t> batch_labels(std::span<const std::size_t> indices) const;

  // Throws ConsistencyError when an invariant does not hold.
  void validate() const;
};

// Fashion-MNIST/MNIST IDX pair (magic 0x00000803 images, 0x00000801 labels).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
// Writes the pair back; pixel bytes are round(v * 255).
void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// CIFAR-10 binary batch: 3073-byte records, label byte + 3x32x32 channel-major.
Dataset load_cifar10_bin(const std::filesystem::path& path);
void write_cifar10_bin(const Dataset& data, const std::filesystem::path& path);

struct BlobSpec {
  std::size_t n_per_class = 100;
  std::size_t num_classes = 2;
  std::size_t dim = 2;
  // Distance of each class mean from the centre, in units of noise_std.
  double separation = 4.0;
  // Per-coordinate noise standard deviation in input units.
  double noise_std = 0.1;
  std::uint64_t seed = 0;
};

// Isotropic Gaussian blobs centred at 0.5 and clamped to [0,1]^dim. Class
// means depend only on the seed, so train and test splits share them.
Dataset synthetic_blobs(const BlobSpec& spec, Split split = Split::train);

// Seeded stratified sample of n items without replacement, returned in
// shuffled order.
Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed);

}  // namespace amsreg
