#pragma once

#include <cstddef>
#include <vector>

#include "amsreg/tensor.hpp"

namespace amsreg {

// Sum over the batch of -log softmax(logits)[y], via logsumexp. Labels
// outside [0, K) raise InputError.
template <typename T>
Tensor<T> cross_entropy_sum(const Tensor<T>& logits, const std::vector<std::size_t>& labels);

// Batch mean of the above.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& labels);

}  // namespace amsreg
