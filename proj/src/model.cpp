#include "amsreg/model.hpp"

#include <cmath>

#include "amsreg/bytes.hpp"
#include "amsreg/ops.hpp"
#include "amsreg/rng.hpp"

namespace amsreg {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

ArchitectureConfig mlp_config(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw ConfigError("mlp needs at least input and output widths");
  ArchitectureConfig c;
  c.preset = "mlp";
  c.input_shape = {widths.front()};
  c.num_classes = widths.back();
  c.hidden.assign(widths.begin() + 1, widths.end() - 1);
  return c;
}

ArchitectureConfig lenet_small_config(Shape input_shape, std::size_t num_classes) {
  ArchitectureConfig c;
  c.preset = "lenet-small";
  c.input_shape = std::move(input_shape);
  c.num_classes = num_classes;
  c.hidden = {6, 16, 64};
  c.kernel = 5;
  return c;
}

std::vector<Layer> resolve_layers(const ArchitectureConfig& config) {
  if (config.num_classes == 0) throw ConfigError("num_classes must be positive");
  if (config.input_shape.empty() || shape_numel(config.input_shape) == 0) {
    throw ConfigError("input_shape must be non-empty with positive dimensions");
  }
  std::vector<Layer> layers;
  if (config.preset == "mlp") {
    std::size_t width = shape_numel(config.input_shape);
    if (config.input_shape.size() > 1) layers.push_back(FlattenLayer{});
    for (std::size_t h : config.hidden) {
      if (h == 0) throw ConfigError("mlp hidden width must be positive");
      layers.push_back(DenseLayer{width, h});
      layers.push_back(ReluLayer{});
      width = h;
    }
    layers.push_back(DenseLayer{width, config.num_classes});
    return layers;
  }
  if (config.preset == "lenet-small") {
    if (config.input_shape.size() != 3) {
      throw ConfigError("lenet-small needs a C x H x W input, got " + shape_str(config.input_shape));
    }
    if (config.hidden.size() != 3) throw ConfigError("lenet-small hidden must be {conv1, conv2, dense}");
    const std::size_t k = config.kernel;
    std::size_t c = config.input_shape[0], h = config.input_shape[1], w = config.input_shape[2];
    for (std::size_t stage = 0; stage < 2; ++stage) {
      if (k == 0 || h < k || w < k) throw ConfigError("lenet-small: input too small for kernel");
      layers.push_back(ConvLayer{c, config.hidden[stage], k});
      layers.push_back(ReluLayer{});
      c = config.hidden[stage];
      h = h - k + 1;
      w = w - k + 1;
      if (h < 2 || w < 2) throw ConfigError("lenet-small: input too small for pooling");
      layers.push_back(MaxPoolLayer{2});
      h /= 2;
      w /= 2;
    }
    layers.push_back(FlattenLayer{});
    layers.push_back(DenseLayer{c * h * w, config.hidden[2]});
    layers.push_back(ReluLayer{});
    layers.push_back(DenseLayer{config.hidden[2], config.num_classes});
    return layers;
  }
  throw ConfigError("unknown architecture preset '" + config.preset + "'");
}

std::vector<NamedParameter> parameter_layout(const ArchitectureConfig& config) {
  std::vector<NamedParameter> out;
  std::size_t dense = 0, conv = 0;
  for (const Layer& layer : resolve_layers(config)) {
    std::visit(Overloaded{
                   [&](const DenseLayer& d) {
                     const std::string base = "dense" + std::to_string(dense++);
                     out.push_back({base + ".weight", {d.in, d.out}});
                     out.push_back({base + ".bias", {d.out}});
                   },
                   [&](const ConvLayer& c) {
                     const std::string base = "conv" + std::to_string(conv++);
                     out.push_back({base + ".weight", {c.out_channels, c.in_channels, c.kernel, c.kernel}});
                     out.push_back({base + ".bias", {c.out_channels}});
                   },
                   [](const auto&) {},
               },
               layer);
  }
  return out;
}

template <typename T>
Model<T>::Model(ArchitectureConfig config, std::vector<Tensor<T>> params)
    : config_(std::move(config)),
      layers_(resolve_layers(config_)),
      layout_(parameter_layout(config_)),
      params_(std::move(params)) {
  if (params_.size() != layout_.size()) throw ConfigError("parameter count does not match architecture");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].shape() != layout_[i].shape) {
      throw DimensionError(layout_[i].name + ": expected " + shape_str(layout_[i].shape) + ", got " +
                           shape_str(params_[i].shape()));
    }
  }
}

template <typename T>
Model<T> Model<T>::build(const ArchitectureConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<T>> params;
  for (const NamedParameter& p : parameter_layout(config)) {
    std::vector<T> values(shape_numel(p.shape), T(0));
    if (p.shape.size() > 1) {
      // Dense weights are [in, out]; conv weights are [out, in, k, k].
      const std::size_t fan_in = p.shape.size() == 2 ? p.shape[0] : shape_numel(p.shape) / p.shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (T& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    params.emplace_back(p.shape, std::move(values), true);
  }
  return Model(config, std::move(params));
}

template <typename T>
Model<T> Model<T>::zeros(const ArchitectureConfig& config) {
  std::vector<Tensor<T>> params;
  for (const NamedParameter& p : parameter_layout(config)) params.push_back(Tensor<T>::zeros(p.shape, true));
  return Model(config, std::move(params));
}

template <typename T>
Model<T>::Model(const Model& other)
    : config_(other.config_), layers_(other.layers_), layout_(other.layout_) {
  for (const auto& p : other.params_) params_.push_back(p.detach().set_requires_grad(true));
}

template <typename T>
Model<T>& Model<T>::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& batch) const {
  const Shape& s = batch.shape();
  if (s.size() != config_.input_shape.size() + 1 ||
      !std::equal(config_.input_shape.begin(), config_.input_shape.end(), s.begin() + 1)) {
    throw DimensionError("model expects [B, " + shape_str(config_.input_shape) + "], got " + shape_str(s));
  }
  const std::size_t b = s[0];
  Tensor<T> h = batch;
  std::size_t next_param = 0;
  for (const Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](const DenseLayer&) {
                     h = add_row_bias(matmul(h, params_[next_param]), params_[next_param + 1]);
                     next_param += 2;
                   },
                   [&](const ConvLayer&) {
                     h = add_channel_bias(conv2d(h, params_[next_param], 1, 0), params_[next_param + 1]);
                     next_param += 2;
                   },
                   [&](const ReluLayer&) { h = relu(h); },
                   [&](const MaxPoolLayer& m) { h = maxpool2d(h, m.window); },
                   [&](const FlattenLayer&) { h = reshape(h, Shape{b, h.numel() / b}); },
               },
               layer);
  }
  return h;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  std::vector<Tensor<U>> params;
  for (const auto& p : params_) {
    std::vector<U> values(p.values().begin(), p.values().end());
    params.emplace_back(p.shape(), std::move(values), true);
  }
  return Model<U>(config_, std::move(params));
}

template <typename T>
std::string Model<T>::checksum() const {
  Bytes bytes;
  for (const auto& p : params_) {
    for (T v : p.values()) append_le(bytes, v);
  }
  return hex32(crc32_of(bytes));
}

template <typename T>
bool Model<T>::parameters_finite() const {
  for (const auto& p : params_) {
    for (T v : p.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("argmax_rows expects [B, K]");
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  std::vector<std::size_t> out(b, 0);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t c = 1; c < k; ++c) {
      if (logits.at(r * k + c) > logits.at(r * k + out[r])) out[r] = c;
    }
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;
template std::vector<std::size_t> argmax_rows(const Tensor<float>&);
template std::vector<std::size_t> argmax_rows(const Tensor<double>&);

}  // namespace amsreg
