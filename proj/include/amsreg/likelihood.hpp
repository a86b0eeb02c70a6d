#pragma once

// Energy-based reading of a classifier: log p(x) = logsumexp_y f_y(x) - log Z,
// where the partition function Z never needs to be evaluated because every
// quantity here is either a difference of log-likelihoods or an x-gradient.

#include <string>
#include <vector>

#include "amsreg/model.hpp"

namespace amsreg {

struct LikelihoodValue {
  // logsumexp of the K logits (log p(x) + log Z).
  double value = 0.0;
  std::string sample_id;
};

// Adds the leading batch axis when x has exactly the model's input shape.
template <typename T>
Tensor<T> as_batch(const Model<T>& model, const Tensor<T>& x);

template <typename T>
LikelihoodValue log_likelihood(const Model<T>& model, const Tensor<T>& x, std::string sample_id = {});

// One value per row of a batch.
template <typename T>
std::vector<double> log_likelihoods(const Model<T>& model, const Tensor<T>& batch);

// log p(x') - log p(x).
template <typename T>
double relative_log_likelihood(const Model<T>& model, const Tensor<T>& x_prime, const Tensor<T>& x);

// d log p / dx by differentiating logsumexp(f(x)). Same shape as x; batches
// are handled row by row.
template <typename T>
Tensor<T> likelihood_gradient(const Model<T>& model, const Tensor<T>& x);

// The same gradient assembled as sum_y p(y|x) df_y/dx from K input-gradient
// passes.
template <typename T>
Tensor<T> likelihood_gradient_weighted(const Model<T>& model, const Tensor<T>& x);

// Input Jacobian df/dx of a single sample as [K, D].
template <typename T>
Tensor<T> input_jacobian(const Model<T>& model, const Tensor<T>& x);

// s(x) = -||d log p / dx||.
template <typename T>
double ams_score(const Model<T>& model, const Tensor<T>& x);

// One score per row of a batch, from a single backward pass.
template <typename T>
std::vector<double> ams_scores(const Model<T>& model, const Tensor<T>& batch);

}  // namespace amsreg
