#include "amsreg/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "amsreg/attacks.hpp"
#include "amsreg/landscape.hpp"
#include "amsreg/likelihood.hpp"
#include "amsreg/ops.hpp"

namespace amsreg {

namespace {

using T = Tensor<double>;

T random_t(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& e : v) e = rng.uniform(lo, hi);
  return T(std::move(shape), std::move(v));
}

// Magnitudes in [0.05, 1] with random sign, so relu kinks stay out of reach of
// the finite-difference step.
T away_from_zero(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (double& e : v) e = rng.rademacher() * rng.uniform(0.05, 1.0);
  return T(std::move(shape), std::move(v));
}

// Distinct values spaced 0.01 apart in random order, so max-pool winners are stable.
T distinct(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * static_cast<double>(i) + rng.uniform(0.0, 0.002);
  rng.shuffle(v.begin(), v.end());
  return T(std::move(shape), std::move(v));
}

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// Contracts the op output with fixed random weights so every output element
// gets a distinct upstream gradient.
ScalarFn weighted(Rng& rng, std::function<T(const T&)> op, const Shape& out_shape) {
  T w = random_t(rng, out_shape);
  return [op = std::move(op), w](const T& x) { return sum(mul(op(x), w)); };
}

OpCase unary(Rng& rng, T x, std::function<T(const T&)> op) {
  const Shape out = [&] {
    NoGradGuard g;
    return op(x).shape();
  }();
  return {weighted(rng, std::move(op), out), std::move(x)};
}

Shape rank2(Rng& rng) { return {between(rng, 1, 4), between(rng, 1, 5)}; }
Shape rank3(Rng& rng) { return {between(rng, 1, 3), between(rng, 1, 4), between(rng, 1, 4)}; }

ConvGeometry random_geometry(Rng& rng) {
  ConvGeometry g;
  g.batch = between(rng, 1, 2);
  g.channels = between(rng, 1, 2);
  g.height = between(rng, 3, 6);
  g.width = between(rng, 3, 6);
  g.kernel_h = g.kernel_w = between(rng, 1, 3);
  g.stride = between(rng, 1, 2);
  g.padding = rng.below(2);
  return g;
}

Shape image_shape(const ConvGeometry& g) { return {g.batch, g.channels, g.height, g.width}; }

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Model<double> random_mlp(Rng& rng, std::size_t max_dim, std::size_t min_k, std::size_t max_k) {
  const std::size_t d = between(rng, 2, max_dim), h = between(rng, 2, 12), k = between(rng, min_k, max_k);
  return Model<double>::build(mlp_config({d, h, k}), rng.next());
}

T random_input(Rng& rng, const Model<double>& model, std::size_t batch = 1) {
  Shape s{batch};
  s.insert(s.end(), model.input_shape().begin(), model.input_shape().end());
  return random_t(rng, s, 0.0, 1.0);
}

}  // namespace

std::vector<OpFamily> op_families() {
  std::vector<OpFamily> f;
  auto binary = [&](std::string name, std::function<T(const T&, const T&)> op) {
    f.push_back({name + "[lhs]", [op](Rng& rng) {
                   const Shape s = rank3(rng);
                   T other = random_t(rng, s, 0.5, 1.5);
                   return unary(rng, random_t(rng, s, 0.5, 1.5), [op, other](const T& x) { return op(x, other); });
                 }});
    f.push_back({name + "[rhs]", [op](Rng& rng) {
                   const Shape s = rank3(rng);
                   T other = random_t(rng, s, 0.5, 1.5);
                   return unary(rng, random_t(rng, s, 0.5, 1.5), [op, other](const T& x) { return op(other, x); });
                 }});
  };
  binary("add", [](const T& a, const T& b) { return add(a, b); });
  binary("sub", [](const T& a, const T& b) { return sub(a, b); });
  binary("mul", [](const T& a, const T& b) { return mul(a, b); });
  f.push_back({"neg", [](Rng& rng) { return unary(rng, random_t(rng, rank3(rng)), [](const T& x) { return neg(x); }); }});
  f.push_back({"scale", [](Rng& rng) {
                 const double c = rng.uniform(-3, 3);
                 return unary(rng, random_t(rng, rank3(rng)), [c](const T& x) { return scale(x, c); });
               }});
  f.push_back({"exp", [](Rng& rng) { return unary(rng, random_t(rng, rank3(rng), -2, 2), [](const T& x) { return exp(x); }); }});
  f.push_back({"square", [](Rng& rng) { return unary(rng, random_t(rng, rank3(rng)), [](const T& x) { return square(x); }); }});
  f.push_back({"sum", [](Rng& rng) { return unary(rng, random_t(rng, rank3(rng)), [](const T& x) { return sum(x); }); }});
  f.push_back({"mean", [](Rng& rng) { return unary(rng, random_t(rng, rank3(rng)), [](const T& x) { return mean(x); }); }});
  f.push_back({"sum_axis", [](Rng& rng) {
                 const std::size_t axis = rng.below(3);
                 return unary(rng, random_t(rng, rank3(rng)), [axis](const T& x) { return sum_axis(x, axis); });
               }});
  f.push_back({"expand_axis", [](Rng& rng) {
                 const std::size_t axis = rng.below(3), n = between(rng, 1, 3);
                 return unary(rng, random_t(rng, rank2(rng)), [axis, n](const T& x) { return expand_axis(x, axis, n); });
               }});
  f.push_back({"reshape", [](Rng& rng) {
                 const Shape s = rank3(rng);
                 const Shape out{s[0] * s[1], s[2]};
                 return unary(rng, random_t(rng, s), [out](const T& x) { return reshape(x, out); });
               }});
  f.push_back({"transpose", [](Rng& rng) { return unary(rng, random_t(rng, rank2(rng)), [](const T& x) { return transpose(x); }); }});
  f.push_back({"swap_leading", [](Rng& rng) { return unary(rng, random_t(rng, rank3(rng)), [](const T& x) { return swap_leading(x); }); }});
  f.push_back({"matmul[lhs]", [](Rng& rng) {
                 const std::size_t m = between(rng, 1, 4), k = between(rng, 1, 5), n = between(rng, 1, 4);
                 T b = random_t(rng, {k, n});
                 return unary(rng, random_t(rng, {m, k}), [b](const T& x) { return matmul(x, b); });
               }});
  f.push_back({"matmul[rhs]", [](Rng& rng) {
                 const std::size_t m = between(rng, 1, 4), k = between(rng, 1, 5), n = between(rng, 1, 4);
                 T a = random_t(rng, {m, k});
                 return unary(rng, random_t(rng, {k, n}), [a](const T& x) { return matmul(a, x); });
               }});
  f.push_back({"relu", [](Rng& rng) { return unary(rng, away_from_zero(rng, rank3(rng)), [](const T& x) { return relu(x); }); }});
  f.push_back({"logsumexp", [](Rng& rng) {
                 const std::size_t axis = rng.below(2);
                 return unary(rng, random_t(rng, rank2(rng), -3, 3), [axis](const T& x) { return logsumexp(x, axis); });
               }});
  f.push_back({"softmax", [](Rng& rng) {
                 const std::size_t axis = rng.below(2);
                 return unary(rng, random_t(rng, rank2(rng), -3, 3), [axis](const T& x) { return softmax(x, axis); });
               }});
  f.push_back({"gather", [](Rng& rng) {
                 const Shape s = rank2(rng);
                 const std::size_t n = between(rng, 1, 8);
                 auto idx = std::make_shared<std::vector<std::size_t>>(n);
                 for (auto& i : *idx) i = rng.below(shape_numel(s));
                 IndexMap map = idx;
                 return unary(rng, random_t(rng, s), [map, n](const T& x) { return gather(x, map, {n}); });
               }});
  f.push_back({"scatter_add", [](Rng& rng) {
                 const std::size_t n = between(rng, 1, 8), out = between(rng, 1, 5);
                 auto idx = std::make_shared<std::vector<std::size_t>>(n);
                 for (auto& i : *idx) i = rng.below(out);
                 IndexMap map = idx;
                 return unary(rng, random_t(rng, {n}), [map, out](const T& x) { return scatter_add(x, map, {out}); });
               }});
  f.push_back({"pick", [](Rng& rng) {
                 const Shape s = rank2(rng);
                 std::vector<std::size_t> labels(s[0]);
                 for (auto& l : labels) l = rng.below(s[1]);
                 return unary(rng, random_t(rng, s), [labels](const T& x) { return pick(x, labels); });
               }});
  f.push_back({"im2col", [](Rng& rng) {
                 const ConvGeometry g = random_geometry(rng);
                 return unary(rng, random_t(rng, image_shape(g)), [g](const T& x) { return im2col(x, g); });
               }});
  f.push_back({"col2im", [](Rng& rng) {
                 const ConvGeometry g = random_geometry(rng);
                 return unary(rng, random_t(rng, {g.patch(), g.batch * g.out_h() * g.out_w()}),
                              [g](const T& x) { return col2im(x, g); });
               }});
  f.push_back({"conv2d[input]", [](Rng& rng) {
                 const ConvGeometry g = random_geometry(rng);
                 T k = random_t(rng, {between(rng, 1, 3), g.channels, g.kernel_h, g.kernel_w});
                 return unary(rng, random_t(rng, image_shape(g)),
                              [k, g](const T& x) { return conv2d(x, k, g.stride, g.padding); });
               }});
  f.push_back({"conv2d[kernel]", [](Rng& rng) {
                 const ConvGeometry g = random_geometry(rng);
                 T img = random_t(rng, image_shape(g));
                 return unary(rng, random_t(rng, {between(rng, 1, 3), g.channels, g.kernel_h, g.kernel_w}),
                              [img, g](const T& k) { return conv2d(img, k, g.stride, g.padding); });
               }});
  f.push_back({"add_channel_bias[x]", [](Rng& rng) {
                 const Shape s{between(rng, 1, 2), between(rng, 1, 3), between(rng, 1, 3), between(rng, 1, 3)};
                 T b = random_t(rng, {s[1]});
                 return unary(rng, random_t(rng, s), [b](const T& x) { return add_channel_bias(x, b); });
               }});
  f.push_back({"add_channel_bias[bias]", [](Rng& rng) {
                 const Shape s{between(rng, 1, 2), between(rng, 1, 3), between(rng, 1, 3), between(rng, 1, 3)};
                 T x = random_t(rng, s);
                 return unary(rng, random_t(rng, {s[1]}), [x](const T& b) { return add_channel_bias(x, b); });
               }});
  f.push_back({"add_row_bias[x]", [](Rng& rng) {
                 const Shape s = rank2(rng);
                 T b = random_t(rng, {s[1]});
                 return unary(rng, random_t(rng, s), [b](const T& x) { return add_row_bias(x, b); });
               }});
  f.push_back({"add_row_bias[bias]", [](Rng& rng) {
                 const Shape s = rank2(rng);
                 T x = random_t(rng, s);
                 return unary(rng, random_t(rng, {s[1]}), [x](const T& b) { return add_row_bias(x, b); });
               }});
  f.push_back({"maxpool2d", [](Rng& rng) {
                 const std::size_t w = between(rng, 1, 2);
                 const Shape s{between(rng, 1, 2), between(rng, 1, 2), w * between(rng, 1, 3), w * between(rng, 1, 3)};
                 return unary(rng, distinct(rng, s), [w](const T& x) { return maxpool2d(x, w); });
               }});
  f.push_back({"input_gradient_penalty", [](Rng& rng) {
                 const std::size_t d = between(rng, 2, 4), h = between(rng, 2, 5), k = between(rng, 2, 3);
                 T x = random_t(rng, {1, d});
                 T w2 = random_t(rng, {h, k});
                 T v = random_t(rng, {1, k});
                 ScalarFn fn = [x, w2, v, d, h](const T& w1) {
                   T xin(x.shape(), {x.values().begin(), x.values().end()}, true);
                   T z = matmul(relu(matmul(xin, reshape(w1, {d, h}))), w2);
                   return sum(square(grad(z, xin, v, true)));
                 };
                 return OpCase{fn, random_t(rng, {d * h})};
               }});
  return f;
}

CheckResult check_op_gradients(std::size_t cases_per_op, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"op gradients vs finite differences", true, 0, {}, 0.0};
  double worst = 0.0;
  std::string worst_op;
  const auto families = op_families();
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    Rng rng(derive_seed(seed, fi));
    for (std::size_t c = 0; c < cases_per_op; ++c) {
      const OpCase oc = families[fi].make(rng);
      const double err = finite_diff_check(oc.f, oc.x, 1e-6, 1e-6).max_relative_error;
      ++r.cases;
      if (err > worst) {
        worst = err;
        worst_op = families[fi].name;
      }
    }
  }
  r.passed = worst < tolerance;
  r.detail = std::to_string(families.size()) + " ops, worst rel err " + sci(worst) +
             (worst_op.empty() ? "" : " (" + worst_op + ")");
  r.seconds = elapsed(start);
  return r;
}

double joint_loss_parameter_error(Model<double> model, const Tensor<double>& x,
                                  const std::vector<std::size_t>& labels, const DefenseConfig& defense,
                                  std::uint64_t seed) {
  for (auto& p : model.parameters()) p.zero_grad();
  backward(joint_loss(model, x, labels, defense, seed));
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& p : model.parameters()) {
    const auto g = p.grad();
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double analytic = g ? g->values()[i] : 0.0;
      const double saved = values[i];
      values[i] = saved + h;
      const double up = joint_loss(model, x, labels, defense, seed).item();
      values[i] = saved - h;
      const double down = joint_loss(model, x, labels, defense, seed).item();
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-6));
    }
  }
  return worst;
}

CheckResult check_joint_loss_gradients(std::size_t cases, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"joint_loss parameter gradient", true, 0, {}, 0.0};
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t d = between(rng, 2, 4), h = between(rng, 3, 8), k = between(rng, 2, 4);
    const auto model = Model<double>::build(mlp_config({d, h, k}), rng.next());
    const std::size_t b = between(rng, 1, 4);
    const T x = random_input(rng, model, b);
    std::vector<std::size_t> y(b);
    for (auto& l : y) l = rng.below(k);
    DefenseConfig defense;
    defense.mode = c % 2 == 0 ? DefenseMode::ams_reg : DefenseMode::jacobian_reg;
    defense.lambda = rng.uniform(0.1, 2.0);
    defense.n_proj = between(rng, 1, 3);
    worst = std::max(worst, joint_loss_parameter_error(model, x, y, defense, rng.next()));
    ++r.cases;
  }
  r.passed = worst < tolerance;
  r.detail = "worst rel err " + sci(worst);
  r.seconds = elapsed(start);
  return r;
}

CheckResult check_dual_path(std::size_t cases, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"likelihood gradient dual path", true, 0, {}, 0.0};
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const Model<double> model = c % 20 == 19
                                    ? Model<double>::build(lenet_small_config({1, 16, 16}, between(rng, 2, 5)), rng.next())
                                    : random_mlp(rng, 10, 2, 6);
    const T x = random_input(rng, model, between(rng, 1, 3));
    const T a = likelihood_gradient(model, x);
    const T b = likelihood_gradient_weighted(model, x);
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.at(i) - b.at(i)));
    ++r.cases;
  }
  r.passed = worst < tolerance;
  r.detail = "max abs diff " + sci(worst);
  r.seconds = elapsed(start);
  return r;
}

CheckResult check_prop31(std::size_t cases, std::uint64_t seed, bool inject_fault) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"likelihood gradient bound (exact Jacobians)", true, 0, {}, 0.0};
  Rng rng(seed);
  std::size_t violations = 0;
  double tightest = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const Model<double> model = random_mlp(rng, 8, 2, 6);
    const BoundCheck b = verify_prop31(model, random_input(rng, model));
    const bool holds = inject_fault ? b.rhs <= b.lhs : b.holds;
    if (!holds) ++violations;
    if (b.rhs > 0) tightest = std::max(tightest, b.lhs / b.rhs);
    ++r.cases;
  }
  std::size_t unequal = 0;
  for (std::size_t c = 0; c < 10; ++c) {
    const Model<double> model = random_mlp(rng, 8, 1, 1);
    const BoundCheck b = verify_prop31(model, random_input(rng, model));
    if (b.lhs != b.rhs) ++unequal;
  }
  r.passed = violations == 0 && unequal == 0;
  r.detail = std::to_string(violations) + " violations, max lhs/rhs " + sci(tightest) + ", " +
             std::to_string(unequal) + "/10 K=1 cases unequal";
  r.seconds = elapsed(start);
  return r;
}

CheckResult check_estimators(std::size_t n_proj, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"frobenius projection estimators", true, 0, {}, 0.0};
  Rng rng(seed);
  double worst_rel = 0.0, worst_basis = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t d = between(rng, 4, 10), k = between(rng, 2, 5);
    const auto model = Model<double>::build(mlp_config({d, k}), rng.next());
    const T x = random_input(rng, model);
    double exact = 0.0;
    for (double w : model.parameters()[0].values()) exact += w * w;
    const double basis = frobenius_basis_exhaustive(model, x, JacobianKind::plain);
    worst_basis = std::max(worst_basis, std::abs(basis - exact) / exact);
    const double plain = jacobian_frob_estimate(model, x, n_proj, rng.next()).value;
    worst_rel = std::max(worst_rel, std::abs(plain - exact) / exact);
    const double weighted_exact = frobenius_exact(model, x, JacobianKind::weighted);
    const double weighted = ams_frob_estimate(model, x, n_proj, rng.next()).value;
    worst_rel = std::max(worst_rel, std::abs(weighted - weighted_exact) / weighted_exact);
    r.cases += 2;
  }
  r.passed = worst_rel < 0.05 && worst_basis < 1e-12;
  r.detail = "n_proj " + std::to_string(n_proj) + ", worst rel err " + sci(worst_rel) + ", basis " + sci(worst_basis);
  r.seconds = elapsed(start);
  return r;
}

namespace {

template <typename F>
std::size_t budget_violations(const Tensor<F>& adv, const Tensor<F>& x, double eps) {
  const F e = static_cast<F>(eps);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const F a = adv.at(i), o = x.at(i);
    if (!(std::abs(a - o) <= e) || a < F(0) || a > F(1)) ++bad;
  }
  return bad;
}

template <typename F>
std::pair<std::size_t, std::size_t> pgd_sweep(std::size_t runs, std::uint64_t seed) {
  Rng rng(seed);
  const auto model = Model<double>::build(mlp_config({12, 16, 4}), rng.next()).template cast<F>();
  const double eps_choices[] = {1.0 / 255.0, 8.0 / 255.0, 25.0 / 255.0, 0.3};
  std::size_t violations = 0, done = 0, mismatches = 0;
  while (done < runs) {
    const std::size_t b = std::min<std::size_t>(100, runs - done);
    std::vector<F> xs(b * 12);
    for (F& v : xs) {
      const double u = rng.uniform();
      v = u < 0.1 ? F(0) : u < 0.2 ? F(1) : static_cast<F>(rng.uniform());
    }
    const Tensor<F> x({b, 12}, xs);
    std::vector<std::size_t> y(b);
    for (auto& l : y) l = rng.below(4);
    AttackConfig c;
    c.eps = eps_choices[rng.below(4)];
    c.step_size = c.eps * rng.uniform(0.1, 1.5);
    c.iters = between(rng, 1, 10);
    c.random_start = rng.below(2) == 1;
    c.seed = rng.next();
    violations += budget_violations(pgd(model, x, y, c), x, c.eps);
    c.iters = 1;
    c.random_start = false;
    c.step_size = c.eps * rng.uniform(1.0, 2.0);
    const Tensor<F> one = pgd(model, x, y, c);
    const Tensor<F> fg = fgsm(model, x, y, c.eps);
    if (!std::equal(one.values().begin(), one.values().end(), fg.values().begin())) ++mismatches;
    done += b;
  }
  return {violations, mismatches};
}

}  // namespace

CheckResult check_pgd_invariants(std::size_t runs, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"pgd budget, box and fgsm equivalence", true, runs, {}, 0.0};
  const auto [v32, m32] = pgd_sweep<float>(runs / 2, derive_seed(seed, 0));
  const auto [v64, m64] = pgd_sweep<double>(runs - runs / 2, derive_seed(seed, 1));
  r.passed = v32 + v64 == 0 && m32 + m64 == 0;
  r.detail = std::to_string(v32 + v64) + " budget/box violations, " + std::to_string(m32 + m64) +
             " fgsm mismatches";
  r.seconds = elapsed(start);
  return r;
}

CheckResult check_landscape_invariants(std::size_t seeds, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{"landscape centre, shift and plane invariants", true, 0, {}, 0.0};
  Rng rng(seed);
  std::size_t bad_centre = 0;
  double worst_shift = 0.0;
  for (std::size_t c = 0; c < 20; ++c) {
    auto model = random_mlp(rng, 10, 2, 5);
    const T x = random_t(rng, model.input_shape(), 0.0, 1.0);
    const GridSpec grid{0.1, 3};
    const auto plane = neighborhood(x, sample_direction_pair(model.input_dim(), std::nullopt, rng.next()), grid);
    const auto base = surface(model, plane);
    if (base.values[grid.center_index()] != 0.0) ++bad_centre;
    auto shifted = model;
    const double offset = rng.uniform(-50, 50);
    for (double& b : shifted.parameters().back().mutable_values()) b += offset;
    const auto moved = surface(shifted, plane);
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      worst_shift = std::max(worst_shift, std::abs(base.values[i] - moved.values[i]));
    }
    r.cases += 2;
  }
  std::size_t bad_planes = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto pair = sample_direction_pair(784, std::nullopt, derive_seed(seed, s));
    double dot = 0.0, nd = 0.0, np = 0.0;
    bool signs = true;
    for (std::size_t i = 0; i < pair.d.size(); ++i) {
      dot += pair.d[i] * pair.d_perp[i];
      nd += pair.d[i] * pair.d[i];
      np += pair.d_perp[i] * pair.d_perp[i];
      signs = signs && std::abs(pair.d[i]) == 1.0;
    }
    if (!signs || std::abs(dot) > 1e-9 * nd || std::abs(std::sqrt(np) - std::sqrt(nd)) > 1e-9 * std::sqrt(nd)) ++bad_planes;
    ++r.cases;
  }
  r.passed = bad_centre == 0 && worst_shift < 1e-9 && bad_planes == 0;
  r.detail = std::to_string(bad_centre) + " non-zero centres, shift diff " + sci(worst_shift) + ", " +
             std::to_string(bad_planes) + " bad planes";
  r.seconds = elapsed(start);
  return r;
}

std::vector<CheckResult> run_verification(const VerifyOptions& o) {
  return {check_op_gradients(o.grad_cases_per_op, derive_seed(o.seed, 1)),
          check_joint_loss_gradients(o.joint_loss_cases, derive_seed(o.seed, 2)),
          check_dual_path(o.dual_path_cases, derive_seed(o.seed, 3)),
          check_prop31(o.prop31_cases, derive_seed(o.seed, 4), o.inject_fault),
          check_estimators(o.estimator_projections, derive_seed(o.seed, 5)),
          check_pgd_invariants(o.pgd_runs, derive_seed(o.seed, 6)),
          check_landscape_invariants(o.direction_seeds, derive_seed(o.seed, 7))};
}

}  // namespace amsreg
