#pragma once

#include <cstddef>
#include <functional>

#include "amsreg/tensor.hpp"

namespace amsreg {

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares the autodiff gradient of scalar f at x with central differences of
// step h, coordinate by coordinate. The per-coordinate error is
// |analytic - numeric| / (|analytic| + |numeric| + floor).
// Throws NumericError if f is non-finite at any probe point.
GradCheckResult finite_diff_check(const ScalarFn& f, const Tensor<double>& x, double h = 1e-5,
                                  double floor = 1e-6);

}  // namespace amsreg
