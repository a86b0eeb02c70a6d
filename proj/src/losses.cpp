#include "amsreg/losses.hpp"

#include "amsreg/errors.hpp"
#include "amsreg/ops.hpp"

namespace amsreg {

template <typename T>
Tensor<T> cross_entropy_sum(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy expects [B, K] logits");
  if (labels.size() != logits.dim(0)) throw DimensionError("cross_entropy: label count differs from batch");
  return sum(sub(logsumexp(logits, 1), pick(logits, labels)));
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
  return scale(cross_entropy_sum(logits, labels), T(1) / static_cast<T>(labels.size()));
}

template Tensor<float> cross_entropy_sum(const Tensor<float>&, const std::vector<std::size_t>&);
template Tensor<double> cross_entropy_sum(const Tensor<double>&, const std::vector<std::size_t>&);
template Tensor<float> cross_entropy(const Tensor<float>&, const std::vector<std::size_t>&);
template Tensor<double> cross_entropy(const Tensor<double>&, const std::vector<std::size_t>&);

}  // namespace amsreg
