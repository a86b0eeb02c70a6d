#include "amsreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>

#include "amsreg/rng.hpp"

namespace amsreg {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPixels = 3072;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw IoError("truncated header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<unsigned char>& bytes, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) bytes.push_back(static_cast<unsigned char>(v >> shift));
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::size_t class_count(const std::vector<std::size_t>& labels) {
  std::size_t k = 0;
  for (std::size_t y : labels) k = std::max(k, y + 1);
  return k;
}

}  // namespace

std::string_view split_name(Split s) { return s == Split::train ? "train" : "test"; }

std::span<const double> Dataset::input(std::size_t i) const {
  const std::size_t d = sample_dim();
  return std::span<const double>(inputs).subspan(i * d, d);
}

template <typename T>
Tensor<T> Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InputError("empty batch requested from " + name);
  const std::size_t d = sample_dim();
  std::vector<T> values;
  values.reserve(indices.size() * d);
  for (std::size_t i : indices) {
    if (i >= size()) throw InputError("sample index " + std::to_string(i) + " out of range");
    for (double v : input(i)) values.push_back(static_cast<T>(v));
  }
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  return Tensor<T>(std::move(shape), std::move(values));
}

template <typename T>
Tensor<T> Dataset::sample(std::size_t i) const {
  const std::size_t idx[] = {i};
  return batch<T>(idx);
}

std::vector<std::size_t> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

void Dataset::validate() const {
  if (inputs.size() != labels.size() * sample_dim()) {
    throw ConsistencyError(name + ": " + std::to_string(inputs.size()) + " input values for " +
                           std::to_string(labels.size()) + " labels of shape " +
                           shape_str(sample_shape));
  }
  for (double v : inputs) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConsistencyError(name + ": input value outside [0,1]");
  }
  for (std::size_t y : labels) {
    if (y >= num_classes) throw ConsistencyError(name + ": label out of range");
  }
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto label_bytes = read_file(labels_path);
  if (read_be32(images, 0, images_path) != kIdxImageMagic) {
    throw FormatError("bad IDX image magic in " + images_path.string());
  }
  if (read_be32(label_bytes, 0, labels_path) != kIdxLabelMagic) {
    throw FormatError("bad IDX label magic in " + labels_path.string());
  }
  const std::size_t n_images = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t n_labels = read_be32(label_bytes, 4, labels_path);
  if (n_images != n_labels) {
    throw ConsistencyError("IDX count mismatch: " + std::to_string(n_images) + " images vs " +
                           std::to_string(n_labels) + " labels");
  }
  if (rows == 0 || cols == 0) throw FormatError("IDX image with zero dimension");
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + n_images * pixels) throw IoError("truncated IDX image file " + images_path.string());
  if (label_bytes.size() < 8 + n_labels) throw IoError("truncated IDX label file " + labels_path.string());

  Dataset data;
  data.name = images_path.filename().string();
  data.split = images_path.filename().string().starts_with("t10k") ? Split::test : Split::train;
  data.sample_shape = {1, rows, cols};
  data.inputs.resize(n_images * pixels);
  for (std::size_t i = 0; i < data.inputs.size(); ++i) data.inputs[i] = images[16 + i] / 255.0;
  data.labels.assign(label_bytes.begin() + 8, label_bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n_labels));
  data.num_classes = class_count(data.labels);
  data.validate();
  return data;
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  const Shape& s = data.sample_shape;
  if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1))) {
    throw InputError("IDX export needs single-channel images, got " + shape_str(s));
  }
  const std::size_t rows = s[s.size() - 2], cols = s[s.size() - 1];
  std::vector<unsigned char> images;
  put_be32(images, kIdxImageMagic);
  put_be32(images, static_cast<std::uint32_t>(data.size()));
  put_be32(images, static_cast<std::uint32_t>(rows));
  put_be32(images, static_cast<std::uint32_t>(cols));
  for (double v : data.inputs) images.push_back(to_byte(v));
  std::vector<unsigned char> labels;
  put_be32(labels, kIdxLabelMagic);
  put_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (std::size_t y : data.labels) {
    if (y > 255) throw InputError("label does not fit in a byte");
    labels.push_back(static_cast<unsigned char>(y));
  }
  write_file(images_path, images);
  write_file(labels_path, labels);
}

Dataset load_cifar10_bin(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                      " is not a positive multiple of 3073");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  Dataset data;
  data.name = path.filename().string();
  data.split = data.name.starts_with("test") ? Split::test : Split::train;
  data.sample_shape = {3, 32, 32};
  data.num_classes = 10;
  data.inputs.resize(n * kCifarPixels);
  data.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecord;
    if (rec[0] > 9) throw FormatError(path.string() + ": label byte " + std::to_string(rec[0]) + " > 9");
    data.labels[r] = rec[0];
    for (std::size_t p = 0; p < kCifarPixels; ++p) data.inputs[r * kCifarPixels + p] = rec[1 + p] / 255.0;
  }
  data.validate();
  return data;
}

void write_cifar10_bin(const Dataset& data, const std::filesystem::path& path) {
  if (data.sample_shape != Shape{3, 32, 32}) throw InputError("CIFAR-10 export needs 3x32x32 samples");
  std::vector<unsigned char> bytes;
  bytes.reserve(data.size() * kCifarRecord);
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.labels[r] > 9) throw InputError("CIFAR-10 labels must be < 10");
    bytes.push_back(static_cast<unsigned char>(data.labels[r]));
    for (double v : data.input(r)) bytes.push_back(to_byte(v));
  }
  write_file(path, bytes);
}

Dataset synthetic_blobs(const BlobSpec& spec, Split split) {
  if (spec.num_classes < 2 || spec.dim < 2) throw ConfigError("blobs need at least 2 classes and 2 dims");
  if (spec.n_per_class == 0) throw ConfigError("blobs need n_per_class >= 1");
  Rng mean_rng(derive_seed(spec.seed, 0));
  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto dir = unit_sphere(mean_rng, spec.dim);
    for (double& v : dir) v = 0.5 + v * spec.separation * spec.noise_std;
    means.push_back(std::move(dir));
  }
  Rng rng(derive_seed(spec.seed, split == Split::train ? 1 : 2));
  Dataset data;
  data.name = "blobs";
  data.split = split;
  data.sample_shape = {spec.dim};
  data.num_classes = spec.num_classes;
  for (std::size_t i = 0; i < spec.n_per_class; ++i) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        data.inputs.push_back(std::clamp(means[c][j] + spec.noise_std * rng.normal(), 0.0, 1.0));
      }
      data.labels.push_back(c);
    }
  }
  data.validate();
  return data;
}

Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n > data.size()) {
    throw InputError("subset of " + std::to_string(n) + " from " + std::to_string(data.size()) + " samples");
  }
  Rng rng(seed);
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  // Largest-remainder allocation of n across classes.
  struct Quota { std::size_t label; std::size_t take; double remainder; };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members.begin(), members.end());
    const double exact = static_cast<double>(n) * static_cast<double>(members.size()) /
                         static_cast<double>(data.size());
    const auto take = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({label, take, exact - static_cast<double>(take)});
    assigned += take;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % order.size()) {
    Quota& q = quotas[order[k]];
    if (q.take < by_class[q.label].size()) {
      ++q.take;
      ++assigned;
    }
  }

  std::vector<std::size_t> chosen;
  for (const Quota& q : quotas) {
    const auto& members = by_class[q.label];
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(q.take));
  }
  rng.shuffle(chosen.begin(), chosen.end());

  Dataset out;
  out.name = data.name;
  out.split = data.split;
  out.sample_shape = data.sample_shape;
  out.num_classes = data.num_classes;
  for (std::size_t i : chosen) {
    const auto x = data.input(i);
    out.inputs.insert(out.inputs.end(), x.begin(), x.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

template Tensor<float> Dataset::batch<float>(std::span<const std::size_t>) const;
template Tensor<double> Dataset::batch<double>(std::span<const std::size_t>) const;
template Tensor<float> Dataset::sample<float>(std::size_t) const;
template Tensor<double> Dataset::sample<double>(std::size_t) const;

}  // namespace amsreg
