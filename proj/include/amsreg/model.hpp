#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "amsreg/tensor.hpp"

namespace amsreg {

// Desk-scale presets:
//   "mlp"          dense layers with relu between them; `hidden` lists the
//                  hidden widths (empty hidden gives a single affine layer).
//   "lenet-small"  conv-relu-pool, conv-relu-pool, dense-relu, dense.
//                  `hidden` is {conv1 channels, conv2 channels, dense width}.
struct ArchitectureConfig {
  std::string preset = "mlp";
  Shape input_shape;
  std::size_t num_classes = 0;
  std::vector<std::size_t> hidden;
  std::size_t kernel = 5;

  bool operator==(const ArchitectureConfig&) const = default;
};

// Convenience for "mlp" given full layer widths, e.g. {784, 128, 10}.
ArchitectureConfig mlp_config(const std::vector<std::size_t>& widths);
ArchitectureConfig lenet_small_config(Shape input_shape, std::size_t num_classes);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
};
struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
};
struct ReluLayer {};
struct MaxPoolLayer {
  std::size_t window = 2;
};
struct FlattenLayer {};

using Layer = std::variant<DenseLayer, ConvLayer, ReluLayer, MaxPoolLayer, FlattenLayer>;

// Resolves a preset into its layer list; throws ConfigError for unknown
// presets or shapes the preset cannot handle.
std::vector<Layer> resolve_layers(const ArchitectureConfig& config);

struct NamedParameter {
  std::string name;
  Shape shape;
};

// Parameter names and shapes in storage order.
std::vector<NamedParameter> parameter_layout(const ArchitectureConfig& config);

// Classifier f_theta mapping [B, input_shape...] to [B, K] logits. Copies are
// deep (parameters are duplicated).
template <typename T>
class Model {
 public:
  using value_type = T;

  // He-uniform weights, zero biases.
  static Model build(const ArchitectureConfig& config, std::uint64_t seed);
  // All parameters zero; every input maps to all-zero logits.
  static Model zeros(const ArchitectureConfig& config);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  Tensor<T> forward(const Tensor<T>& batch) const;

  const ArchitectureConfig& config() const { return config_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const Shape& input_shape() const { return config_.input_shape; }
  std::size_t input_dim() const { return shape_numel(config_.input_shape); }
  std::size_t num_classes() const { return config_.num_classes; }

  std::vector<Tensor<T>>& parameters() { return params_; }
  const std::vector<Tensor<T>>& parameters() const { return params_; }
  const std::vector<NamedParameter>& layout() const { return layout_; }
  std::size_t parameter_count() const;

  // Same architecture and values in another precision.
  template <typename U>
  Model<U> cast() const;

  // CRC-32 of the little-endian parameter bytes, as 8 hex digits.
  std::string checksum() const;
  bool parameters_finite() const;

 private:
  Model(ArchitectureConfig config, std::vector<Tensor<T>> params);

  ArchitectureConfig config_;
  std::vector<Layer> layers_;
  std::vector<NamedParameter> layout_;
  std::vector<Tensor<T>> params_;

  template <typename U>
  friend class Model;
};

template <typename T>
Tensor<T> forward_logits(const Model<T>& model, const Tensor<T>& batch) {
  return model.forward(batch);
}

// Predicted class per row of a [B, K] logit tensor.
template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits);

}  // namespace amsreg
