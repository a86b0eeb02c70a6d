#include "amsreg/likelihood.hpp"

#include <cmath>

#include "amsreg/errors.hpp"
#include "amsreg/ops.hpp"

namespace amsreg {

namespace {

template <typename T>
Tensor<T> input_leaf(const Tensor<T>& x) {
  Tensor<T> leaf = x.detach();
  leaf.set_requires_grad(true);
  return leaf;
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
  }
}

}  // namespace

template <typename T>
Tensor<T> as_batch(const Model<T>& model, const Tensor<T>& x) {
  if (x.shape() != model.input_shape()) return x;
  Shape s{1};
  s.insert(s.end(), x.shape().begin(), x.shape().end());
  return reshape(x.detach(), s);
}

template <typename T>
LikelihoodValue log_likelihood(const Model<T>& model, const Tensor<T>& x, std::string sample_id) {
  const Tensor<T> batch = as_batch(model, x);
  if (batch.dim(0) != 1) throw DimensionError("log_likelihood expects a single sample");
  return {log_likelihoods(model, batch)[0], std::move(sample_id)};
}

template <typename T>
std::vector<double> log_likelihoods(const Model<T>& model, const Tensor<T>& batch) {
  NoGradGuard no_grad;
  const auto lse = logsumexp(model.forward(as_batch(model, batch)), 1);
  return {lse.values().begin(), lse.values().end()};
}

template <typename T>
double relative_log_likelihood(const Model<T>& model, const Tensor<T>& x_prime, const Tensor<T>& x) {
  return log_likelihood(model, x_prime).value - log_likelihood(model, x).value;
}

template <typename T>
Tensor<T> likelihood_gradient(const Model<T>& model, const Tensor<T>& x) {
  const Tensor<T> input = input_leaf(as_batch(model, x));
  const Tensor<T> g = grad(sum(logsumexp(model.forward(input), 1)), input);
  require_finite(g, "likelihood_gradient");
  return reshape(g, x.shape()).detach();
}

template <typename T>
Tensor<T> likelihood_gradient_weighted(const Model<T>& model, const Tensor<T>& x) {
  const Tensor<T> input = input_leaf(as_batch(model, x));
  const Tensor<T> logits = model.forward(input);
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  const std::size_t d = input.numel() / b;
  std::vector<double> probs(b * k);
  {
    NoGradGuard no_grad;
    const Tensor<T> p = softmax(logits.detach(), 1);
    probs.assign(p.values().begin(), p.values().end());
  }
  std::vector<double> acc(b * d, 0.0);
  for (std::size_t y = 0; y < k; ++y) {
    const Tensor<T> gy = grad(sum(pick(logits, std::vector<std::size_t>(b, y))), input);
    const auto jy = gy.values();
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t i = 0; i < d; ++i) acc[r * d + i] += probs[r * k + y] * static_cast<double>(jy[r * d + i]);
    }
  }
  Tensor<T> out(x.shape(), std::vector<T>(acc.begin(), acc.end()));
  require_finite(out, "likelihood_gradient_weighted");
  return out;
}

template <typename T>
Tensor<T> input_jacobian(const Model<T>& model, const Tensor<T>& x) {
  const Tensor<T> input = input_leaf(as_batch(model, x));
  if (input.dim(0) != 1) throw DimensionError("input_jacobian expects a single sample");
  const Tensor<T> logits = model.forward(input);
  const std::size_t k = logits.dim(1), d = input.numel();
  std::vector<T> rows;
  rows.reserve(k * d);
  for (std::size_t y = 0; y < k; ++y) {
    const Tensor<T> gy = grad(pick(logits, {y}), input);
    const auto jy = gy.values();
    rows.insert(rows.end(), jy.begin(), jy.end());
  }
  return Tensor<T>({k, d}, std::move(rows));
}

template <typename T>
double ams_score(const Model<T>& model, const Tensor<T>& x) {
  const Tensor<T> batch = as_batch(model, x);
  if (batch.dim(0) != 1) throw DimensionError("ams_score expects a single sample");
  return ams_scores(model, batch)[0];
}

template <typename T>
std::vector<double> ams_scores(const Model<T>& model, const Tensor<T>& batch) {
  const Tensor<T> g = likelihood_gradient(model, as_batch(model, batch));
  const std::size_t b = g.dim(0), d = g.numel() / b;
  const auto gv = g.values();
  std::vector<double> out(b);
  for (std::size_t r = 0; r < b; ++r) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) sq += static_cast<double>(gv[r * d + i]) * static_cast<double>(gv[r * d + i]);
    out[r] = -std::sqrt(sq);
  }
  return out;
}

#define AMSREG_INSTANTIATE(T)                                                                       \
  template Tensor<T> as_batch(const Model<T>&, const Tensor<T>&);                                   \
  template LikelihoodValue log_likelihood(const Model<T>&, const Tensor<T>&, std::string);          \
  template std::vector<double> log_likelihoods(const Model<T>&, const Tensor<T>&);                  \
  template double relative_log_likelihood(const Model<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> likelihood_gradient(const Model<T>&, const Tensor<T>&);                        \
  template Tensor<T> likelihood_gradient_weighted(const Model<T>&, const Tensor<T>&);               \
  template Tensor<T> input_jacobian(const Model<T>&, const Tensor<T>&);                             \
  template double ams_score(const Model<T>&, const Tensor<T>&);                                     \
  template std::vector<double> ams_scores(const Model<T>&, const Tensor<T>&);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

}  // namespace amsreg
