#pragma once
// Built-in verification battery behind `amsreg verify`.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "amsreg/gradcheck.hpp"
#include "amsreg/training.hpp"

namespace amsreg {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  // Worst observed error or a short failure description.
  std::string detail;
  double seconds = 0.0;
};

// A random scalar function of one tensor, built around a single op.
struct OpCase {
  ScalarFn f;
  Tensor<double> x;
};

struct OpFamily {
  std::string name;
  std::function<OpCase(Rng&)> make;
};

// One entry per differentiable op (binary ops appear once per operand).
std::vector<OpFamily> op_families();

CheckResult check_op_gradients(std::size_t cases_per_op, std::uint64_t seed, double tolerance = 1e-4);

// Central differences of joint_loss over every parameter of tiny models.
double joint_loss_parameter_error(Model<double> model, const Tensor<double>& x,
                                  const std::vector<std::size_t>& labels, const DefenseConfig& defense,
                                  std::uint64_t seed);
CheckResult check_joint_loss_gradients(std::size_t cases, std::uint64_t seed, double tolerance = 1e-4);

CheckResult check_dual_path(std::size_t cases, std::uint64_t seed, double tolerance = 1e-8);

// `inject_fault` reverses the inequality so the check must fail.
CheckResult check_prop31(std::size_t cases, std::uint64_t seed, bool inject_fault = false);

CheckResult check_estimators(std::size_t n_proj, std::uint64_t seed);

CheckResult check_pgd_invariants(std::size_t runs, std::uint64_t seed);

CheckResult check_landscape_invariants(std::size_t seeds, std::uint64_t seed);

struct VerifyOptions {
  std::size_t grad_cases_per_op = 100;
  std::size_t joint_loss_cases = 20;
  std::size_t dual_path_cases = 100;
  std::size_t prop31_cases = 1000;
  std::size_t estimator_projections = 10000;
  std::size_t pgd_runs = 10000;
  std::size_t direction_seeds = 1000;
  std::uint64_t seed = 0;
  bool inject_fault = false;
};

std::vector<CheckResult> run_verification(const VerifyOptions& options);

}  // namespace amsreg
