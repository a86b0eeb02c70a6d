#include "amsreg/gradcheck.hpp"

#include <cmath>
#include <vector>

namespace amsreg {

namespace {

// Grad mode stays on: f may itself differentiate internally.
double evaluate(const ScalarFn& f, const Tensor<double>& x) {
  const Tensor<double> y = f(x);
  if (y.numel() != 1) throw ContractError("finite_diff_check: f must return a scalar");
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: f is not finite at probe point");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const ScalarFn& f, const Tensor<double>& x, double h,
                                  double floor) {
  Tensor<double> point(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  const Tensor<double> y = f(point);
  if (y.numel() != 1) throw ContractError("finite_diff_check: f must return a scalar");
  const Tensor<double> inputs[] = {point};
  const Tensor<double> g = grad(y, std::span<const Tensor<double>>(inputs))[0];
  const std::vector<double> analytic(g.values().begin(), g.values().end());

  GradCheckResult result;
  std::vector<double> probe(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = evaluate(f, Tensor<double>(x.shape(), probe));
    probe[i] = saved - h;
    const double down = evaluate(f, Tensor<double>(x.shape(), probe));
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + floor);
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace amsreg
