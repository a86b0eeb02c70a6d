#pragma once

// Differentiable tensor ops. Elementwise binary ops require identical shapes;
// broadcasting is explicit through expand_axis / sum_axis.

#include <cstddef>
#include <memory>
#include <vector>

#include "amsreg/tensor.hpp"

namespace amsreg {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);

// Sum of all elements, shape {1}.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

// Removes `axis` by summation. A rank-1 input yields shape {1}.
template <typename T> Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis);
// Inserts a new axis of length n at position `axis`, repeating values along it.
template <typename T> Tensor<T> expand_axis(const Tensor<T>& a, std::size_t axis, std::size_t n);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
// 2-D transpose.
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
// [A, B, C] -> [B, A, C].
template <typename T> Tensor<T> swap_leading(const Tensor<T>& a);

// [m, k] x [k, n] -> [m, n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// relu'(0) is taken as 0.
template <typename T> Tensor<T> relu(const Tensor<T>& a);

// Reductions along `axis`, always evaluated with the running max subtracted.
template <typename T> Tensor<T> logsumexp(const Tensor<T>& a, std::size_t axis);
template <typename T> Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);

// Flat index maps shared between a gather and its adjoint scatter.
using IndexMap = std::shared_ptr<const std::vector<std::size_t>>;

// out[i] = a[index[i]].
template <typename T> Tensor<T> gather(const Tensor<T>& a, IndexMap index, Shape out_shape);
// out[index[i]] += a[i], out zero-initialised with out_shape.
template <typename T> Tensor<T> scatter_add(const Tensor<T>& a, IndexMap index, Shape out_shape);

// a: [B, K] -> [B], picking a[b, labels[b]].
template <typename T> Tensor<T> pick(const Tensor<T>& a, const std::vector<std::size_t>& labels);

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
  std::size_t patch() const { return channels * kernel_h * kernel_w; }
  // Throws DimensionError when the kernel exceeds the padded input.
  void validate() const;
};

// [B, C, H, W] -> [C*kh*kw, B*oh*ow]; zero padding reads as 0.
template <typename T> Tensor<T> im2col(const Tensor<T>& x, const ConvGeometry& g);
// Adjoint of im2col.
template <typename T> Tensor<T> col2im(const Tensor<T>& cols, const ConvGeometry& g);

// Cross-correlation. x: [B, Cin, H, W] or [Cin, H, W]; kernels: [Cout, Cin, kh, kw].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, std::size_t stride,
                 std::size_t padding);

// x: [B, C, ...], bias: [C].
template <typename T> Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias);
// x: [B, N], bias: [N].
template <typename T> Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias);

// Non-overlapping max pooling with window == stride; first maximum wins ties.
template <typename T> Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window);

// Not differentiable; sign(0) = 0.
template <typename T> Tensor<T> sign(const Tensor<T>& a);

}  // namespace amsreg
