#include "amsreg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace amsreg {

namespace {

using detail::make_result;

constexpr std::size_t kPadIndex = std::numeric_limits<std::size_t>::max();

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

template <typename T>
bool wants(const Tensor<T>& t) {
  return detail::gradient_needed(t);
}

// Repeats `a` along `axis` of out_shape; a.numel() must equal the product of
// the remaining dimensions. Adjoint of sum_axis.
template <typename T>
Tensor<T> expand_to(const Tensor<T>& a, const Shape& out_shape, std::size_t axis) {
  const AxisSplit s = split_at(out_shape, axis);
  if (a.numel() != s.outer * s.inner) {
    throw DimensionError("expand: " + shape_str(a.shape()) + " cannot fill " +
                         shape_str(out_shape) + " along axis " + std::to_string(axis));
  }
  const auto in = a.values();
  std::vector<T> out(shape_numel(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      std::copy_n(in.begin() + o * s.inner, s.inner, out.begin() + (o * s.n + k) * s.inner);
    }
  }
  const Shape in_shape = a.shape();
  return make_result<T>("expand", out_shape, std::move(out), {a},
                        [in_shape, axis](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{reshape(sum_axis(g, axis), in_shape)};
                        });
}

}  // namespace

void ConvGeometry::validate() const {
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  if (kernel_h > height + 2 * padding || kernel_w > width + 2 * padding) {
    throw DimensionError("conv2d: kernel " + std::to_string(kernel_h) + "x" +
                         std::to_string(kernel_w) + " larger than padded input " +
                         std::to_string(height + 2 * padding) + "x" +
                         std::to_string(width + 2 * padding));
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  const auto x = a.values();
  const auto y = b.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b},
                        [](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{g, g};
                        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  const auto x = a.values();
  const auto y = b.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b},
                        [b](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{g, wants(b) ? neg(g) : Tensor<T>{}};
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto x = a.values();
  const auto y = b.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b},
                        [a, b](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{wants(a) ? mul(g, b) : Tensor<T>{},
                                                        wants(b) ? mul(g, a) : Tensor<T>{}};
                        });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const auto x = a.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result<T>("scale", a.shape(), std::move(out), {a},
                        [factor](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{scale(g, factor)};
                        });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  const auto x = a.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x[i]);
  return make_result<T>("exp", a.shape(), std::move(out), {a},
                        [](const Tensor<T>& g, const Tensor<T>& y) {
                          return std::vector<Tensor<T>>{mul(g, y)};
                        });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return mul(a, a);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  return sum_axis(reshape(a, Shape{a.numel()}), 0);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis);
  const auto in = a.values();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      const T* row = in.data() + (o * s.n + k) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  const Shape in_shape = a.shape();
  return make_result<T>("sum_axis", drop_axis(in_shape, axis), std::move(out), {a},
                        [in_shape, axis](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{expand_to(g, in_shape, axis)};
                        });
}

template <typename T>
Tensor<T> expand_axis(const Tensor<T>& a, std::size_t axis, std::size_t n) {
  Shape out_shape = a.shape();
  if (axis > out_shape.size()) throw DimensionError("expand_axis: axis out of range");
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
  return expand_to(a, out_shape, axis);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  const auto in = a.values();
  const Shape in_shape = a.shape();
  return make_result<T>("reshape", std::move(shape), std::vector<T>(in.begin(), in.end()), {a},
                        [in_shape](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{reshape(g, in_shape)};
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects a matrix, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto in = a.values();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  }
  return make_result<T>("transpose", Shape{n, m}, std::move(out), {a},
                        [](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{transpose(g)};
                        });
}

template <typename T>
Tensor<T> swap_leading(const Tensor<T>& a) {
  if (a.rank() != 3) throw DimensionError("swap_leading expects rank 3, got " + shape_str(a.shape()));
  const std::size_t p = a.dim(0), q = a.dim(1), r = a.dim(2);
  const auto in = a.values();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      std::copy_n(in.begin() + (i * q + j) * r, r, out.begin() + (j * p + i) * r);
    }
  }
  return make_result<T>("swap_leading", Shape{q, p, r}, std::move(out), {a},
                        [](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{swap_leading(g)};
                        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto x = a.values();
  const auto y = b.values();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = x[i * k + p];
      const T* brow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result<T>("matmul", Shape{m, n}, std::move(out), {a, b},
                        [a, b](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{
                              wants(a) ? matmul(g, transpose(b)) : Tensor<T>{},
                              wants(b) ? matmul(transpose(a), g) : Tensor<T>{}};
                        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  const auto x = a.values();
  std::vector<T> out(x.size());
  std::vector<T> mask(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = x[i] > T(0);
    mask[i] = on ? T(1) : T(0);
    out[i] = on ? x[i] : T(0);
  }
  Tensor<T> gate(a.shape(), std::move(mask));
  return make_result<T>("relu", a.shape(), std::move(out), {a},
                        [gate](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{mul(g, gate)};
                        });
}

template <typename T>
Tensor<T> logsumexp(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis);
  const auto in = a.values();
  std::vector<T> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < s.n; ++k) peak = std::max(peak, in[(o * s.n + k) * s.inner + i]);
      T acc = T(0);
      for (std::size_t k = 0; k < s.n; ++k) acc += std::exp(in[(o * s.n + k) * s.inner + i] - peak);
      out[o * s.inner + i] = peak + std::log(acc);
    }
  }
  const Shape in_shape = a.shape();
  return make_result<T>("logsumexp", drop_axis(in_shape, axis), std::move(out), {a},
                        [a, in_shape, axis](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{
                              mul(expand_to(g, in_shape, axis), softmax(a, axis))};
                        });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  return exp(sub(a, expand_to(logsumexp(a, axis), a.shape(), axis)));
}

template <typename T>
Tensor<T> gather(const Tensor<T>& a, IndexMap index, Shape out_shape) {
  if (!index || index->size() != shape_numel(out_shape)) {
    throw DimensionError("gather: index map does not match output shape " + shape_str(out_shape));
  }
  const auto in = a.values();
  std::vector<T> out(index->size(), T(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t src = (*index)[i];
    if (src == kPadIndex) continue;
    if (src >= in.size()) throw DimensionError("gather: index out of range");
    out[i] = in[src];
  }
  const Shape in_shape = a.shape();
  return make_result<T>("gather", std::move(out_shape), std::move(out), {a},
                        [index, in_shape](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{scatter_add(g, index, in_shape)};
                        });
}

template <typename T>
Tensor<T> scatter_add(const Tensor<T>& a, IndexMap index, Shape out_shape) {
  if (!index || index->size() != a.numel()) {
    throw DimensionError("scatter_add: index map does not match input " + shape_str(a.shape()));
  }
  const auto in = a.values();
  std::vector<T> out(shape_numel(out_shape), T(0));
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t dst = (*index)[i];
    if (dst == kPadIndex) continue;
    if (dst >= out.size()) throw DimensionError("scatter_add: index out of range");
    out[dst] += in[i];
  }
  const Shape in_shape = a.shape();
  return make_result<T>("scatter_add", std::move(out_shape), std::move(out), {a},
                        [index, in_shape](const Tensor<T>& g, const Tensor<T>&) {
                          return std::vector<Tensor<T>>{gather(g, index, in_shape)};
                        });
}

template <typename T>
Tensor<T> pick(const Tensor<T>& a, const std::vector<std::size_t>& labels) {
  if (a.rank() != 2 || a.dim(0) != labels.size()) {
    throw DimensionError("pick: expected [B, K] with B=" + std::to_string(labels.size()) +
                         ", got " + shape_str(a.shape()));
  }
  const std::size_t k = a.dim(1);
  auto index = std::make_shared<std::vector<std::size_t>>(labels.size());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] >= k) throw InputError("label " + std::to_string(labels[b]) + " out of range");
    (*index)[b] = b * k + labels[b];
  }
  return gather(a, IndexMap(index), Shape{labels.size()});
}

namespace {

IndexMap im2col_index(const ConvGeometry& g) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const std::size_t cols = g.batch * oh * ow;
  auto index = std::make_shared<std::vector<std::size_t>>(g.patch() * cols);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const std::size_t row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::size_t col = (b * oh + oy) * ow + ox;
              // Padded coordinates, shifted so the real image starts at `padding`.
              const std::size_t py = oy * g.stride + ki;
              const std::size_t px = ox * g.stride + kj;
              std::size_t src = kPadIndex;
              if (py >= g.padding && px >= g.padding && py - g.padding < g.height &&
                  px - g.padding < g.width) {
                src = ((b * g.channels + c) * g.height + (py - g.padding)) * g.width +
                      (px - g.padding);
              }
              (*index)[row * cols + col] = src;
            }
          }
        }
      }
    }
  }
  return index;
}

template <typename T>
void check_conv_input(const Tensor<T>& x, const ConvGeometry& g) {
  const Shape expected{g.batch, g.channels, g.height, g.width};
  if (x.shape() != expected) {
    throw DimensionError("conv input " + shape_str(x.shape()) + " != " + shape_str(expected));
  }
  g.validate();
}

}  // namespace

template <typename T>
Tensor<T> im2col(const Tensor<T>& x, const ConvGeometry& g) {
  check_conv_input(x, g);
  return gather(x, im2col_index(g), Shape{g.patch(), g.batch * g.out_h() * g.out_w()});
}

template <typename T>
Tensor<T> col2im(const Tensor<T>& cols, const ConvGeometry& g) {
  g.validate();
  return scatter_add(cols, im2col_index(g), Shape{g.batch, g.channels, g.height, g.width});
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, std::size_t stride,
                 std::size_t padding) {
  if (x.rank() == 3) {
    const Shape s = x.shape();
    Tensor<T> y = conv2d(reshape(x, Shape{1, s[0], s[1], s[2]}), kernels, stride, padding);
    return reshape(y, Shape{y.dim(1), y.dim(2), y.dim(3)});
  }
  if (x.rank() != 4 || kernels.rank() != 4 || kernels.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with kernels " +
                         shape_str(kernels.shape()));
  }
  ConvGeometry g;
  g.batch = x.dim(0);
  g.channels = x.dim(1);
  g.height = x.dim(2);
  g.width = x.dim(3);
  g.kernel_h = kernels.dim(2);
  g.kernel_w = kernels.dim(3);
  g.stride = stride;
  g.padding = padding;
  g.validate();
  const std::size_t out_c = kernels.dim(0);
  const std::size_t plane = g.out_h() * g.out_w();
  Tensor<T> cols = im2col(x, g);
  Tensor<T> y = matmul(reshape(kernels, Shape{out_c, g.patch()}), cols);
  y = swap_leading(reshape(y, Shape{out_c, g.batch, plane}));
  return reshape(y, Shape{g.batch, out_c, g.out_h(), g.out_w()});
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() < 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("bias " + shape_str(bias.shape()) + " does not match channels of " +
                         shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t rest = x.numel() / (batch * channels);
  Tensor<T> expanded = expand_axis(expand_axis(bias, 0, batch), 2, rest);
  return reshape(add(reshape(x, Shape{batch, channels, rest}), expanded), x.shape());
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 2) throw DimensionError("add_row_bias expects [B, N], got " + shape_str(x.shape()));
  return add_channel_bias(x, bias);
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window) {
  if (x.rank() != 4 || window == 0 || x.dim(2) < window || x.dim(3) < window) {
    throw DimensionError("maxpool2d: window " + std::to_string(window) + " invalid for " +
                         shape_str(x.shape()));
  }
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / window, ow = w / window;
  const auto in = x.values();
  auto index = std::make_shared<std::vector<std::size_t>>(b * c * oh * ow);
  std::size_t out_i = 0;
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = base + oy * window * w + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t at = base + (oy * window + dy) * w + ox * window + dx;
            if (in[at] > in[best]) best = at;
          }
        }
        (*index)[out_i++] = best;
      }
    }
  }
  return gather(x, IndexMap(index), Shape{b, c, oh, ow});
}

template <typename T>
Tensor<T> sign(const Tensor<T>& a) {
  const auto x = a.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = T((x[i] > T(0)) - (x[i] < T(0)));
  return Tensor<T>(a.shape(), std::move(out));
}

#define AMSREG_INSTANTIATE(T)                                                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> neg(const Tensor<T>&);                                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                   \
  template Tensor<T> exp(const Tensor<T>&);                                                        \
  template Tensor<T> square(const Tensor<T>&);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> mean(const Tensor<T>&);                                                       \
  template Tensor<T> sum_axis(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> expand_axis(const Tensor<T>&, std::size_t, std::size_t);                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                             \
  template Tensor<T> transpose(const Tensor<T>&);                                                  \
  template Tensor<T> swap_leading(const Tensor<T>&);                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> logsumexp(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                       \
  template Tensor<T> gather(const Tensor<T>&, IndexMap, Shape);                                    \
  template Tensor<T> scatter_add(const Tensor<T>&, IndexMap, Shape);                               \
  template Tensor<T> pick(const Tensor<T>&, const std::vector<std::size_t>&);                      \
  template Tensor<T> im2col(const Tensor<T>&, const ConvGeometry&);                                \
  template Tensor<T> col2im(const Tensor<T>&, const ConvGeometry&);                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);         \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> sign(const Tensor<T>&);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

#undef AMSREG_INSTANTIATE

}  // namespace amsreg
