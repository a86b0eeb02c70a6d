#include "amsreg/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "amsreg/errors.hpp"
#include "amsreg/losses.hpp"
#include "amsreg/ops.hpp"
#include "amsreg/rng.hpp"
#include "amsreg/schema.hpp"

namespace amsreg {

namespace {

template <typename T>
T ball_upper(T x, T eps) {
  T hi = x + eps;
  while (hi - x > eps) hi = std::nextafter(hi, -std::numeric_limits<T>::infinity());
  return hi;
}

template <typename T>
T ball_lower(T x, T eps) {
  T lo = x - eps;
  while (x - lo > eps) lo = std::nextafter(lo, std::numeric_limits<T>::infinity());
  return lo;
}

template <typename T>
Tensor<T> signed_step(const Tensor<T>& x, const Tensor<T>& g, double step) {
  const auto xv = x.values();
  const auto gv = g.values();
  const T s = static_cast<T>(step);
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T dir = gv[i] > T(0) ? T(1) : (gv[i] < T(0) ? T(-1) : T(0));
    out[i] = xv[i] + s * dir;
  }
  return Tensor<T>(x.shape(), std::move(out));
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

}  // namespace

std::string_view attack_kind_name(AttackKind kind) {
  return kind == AttackKind::fgsm ? "fgsm" : "pgd";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "pgd") return AttackKind::pgd;
  throw ConfigError("unknown attack kind '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("attack eps must be finite and >= 0");
  if (kind == AttackKind::pgd) {
    if (iters < 1) throw ConfigError("pgd needs iters >= 1");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("pgd needs step_size > 0");
  }
}

AttackConfig attack_preset(std::string_view name, std::optional<double> eps) {
  AttackConfig c;
  if (name == "pgd-cifar") {
    c.eps = 8.0 / 255.0;
    c.step_size = 2.0 / 255.0;
    c.iters = 5;
  } else if (name == "pgd-fmnist") {
    c.eps = 25.0 / 255.0;
    c.step_size = 6.25 / 255.0;
    c.iters = 10;
  } else if (name == "fgsm") {
    if (!eps) throw ConfigError("the fgsm preset needs an explicit eps");
    c.kind = AttackKind::fgsm;
    c.iters = 1;
    c.step_size = *eps;
  } else {
    throw ConfigError("unknown attack preset '" + std::string(name) + "' (pgd-cifar|pgd-fmnist|fgsm)");
  }
  if (eps) c.eps = *eps;
  c.validate();
  return c;
}

nlohmann::json attack_to_json(const AttackConfig& c) {
  return {{"kind", attack_kind_name(c.kind)}, {"eps", c.eps},
          {"step_size", c.step_size},         {"iters", c.iters},
          {"random_start", c.random_start},   {"seed", c.seed}};
}

AttackConfig attack_from_json(const nlohmann::json& j) {
  AttackConfig c;
  try {
    if (j.contains("preset")) {
      std::optional<double> eps;
      if (j.contains("eps")) eps = j.at("eps").get<double>();
      c = attack_preset(j.at("preset").get<std::string>(), eps);
    }
    if (j.contains("kind")) c.kind = parse_attack_kind(j.at("kind").get<std::string>());
    c.eps = j.value("eps", c.eps);
    c.step_size = j.value("step_size", c.step_size);
    c.iters = j.value("iters", c.iters);
    c.random_start = j.value("random_start", c.random_start);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid attack config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
Tensor<T> loss_input_gradient(const Model<T>& model, const Tensor<T>& x,
                              const std::vector<std::size_t>& labels) {
  Tensor<T> input = x.detach();
  input.set_requires_grad(true);
  return grad(cross_entropy_sum(model.forward(input), labels), input);
}

template <typename T>
Tensor<T> project_linf(const Tensor<T>& candidate, const Tensor<T>& x, double eps) {
  if (candidate.shape() != x.shape()) throw DimensionError("project_linf: shape mismatch");
  const T e = static_cast<T>(eps);
  const auto cv = candidate.values();
  const auto xv = x.values();
  std::vector<T> out(cv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = std::clamp(cv[i], ball_lower(xv[i], e), ball_upper(xv[i], e));
    out[i] = std::clamp(v, T(0), T(1));
  }
  return Tensor<T>(x.shape(), std::move(out));
}

template <typename T>
Tensor<T> fgsm(const Model<T>& model, const Tensor<T>& x, const std::vector<std::size_t>& labels,
               double eps) {
  if (eps == 0.0) return x.detach();
  return project_linf(signed_step(x, loss_input_gradient(model, x, labels), eps), x, eps);
}

template <typename T>
Tensor<T> pgd(const Model<T>& model, const Tensor<T>& x, const std::vector<std::size_t>& labels,
              const AttackConfig& config) {
  config.validate();
  if (config.kind != AttackKind::pgd) throw ConfigError("pgd called with a non-pgd config");
  Tensor<T> current = x.detach();
  if (config.random_start) {
    Rng rng(config.seed);
    std::vector<T> start(x.numel());
    const auto xv = x.values();
    for (std::size_t i = 0; i < start.size(); ++i) {
      start[i] = xv[i] + static_cast<T>(rng.uniform(-config.eps, config.eps));
    }
    current = project_linf(Tensor<T>(x.shape(), std::move(start)), x, config.eps);
  }
  for (std::size_t t = 0; t < config.iters; ++t) {
    const Tensor<T> g = loss_input_gradient(model, current, labels);
    current = project_linf(signed_step(current, g, config.step_size), x, config.eps);
  }
  return current;
}

template <typename T>
Tensor<T> run_attack(const Model<T>& model, const Tensor<T>& x,
                     const std::vector<std::size_t>& labels, const AttackConfig& config) {
  config.validate();
  if (config.kind == AttackKind::fgsm) return fgsm(model, x, labels, config.eps);
  return pgd(model, x, labels, config);
}

template <typename T>
double clean_accuracy(const Model<T>& model, const Dataset& data, std::size_t batch_size) {
  AttackConfig none;
  none.eps = 0.0;
  return adversarial_accuracy(model, data, none, batch_size);
}

template <typename T>
double adversarial_accuracy(const Model<T>& model, const Dataset& data, const AttackConfig& config,
                            std::size_t batch_size) {
  if (data.empty()) throw InputError("adversarial_accuracy: empty dataset");
  config.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const auto idx = iota_range(begin, std::min(data.size(), begin + batch_size));
    const auto labels = data.batch_labels(idx);
    Tensor<T> x = data.batch<T>(idx);
    if (config.eps > 0.0) x = run_attack(model, x, labels, config);
    NoGradGuard no_grad;
    const auto predicted = argmax_rows(model.forward(x));
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

template <typename T>
RobustnessReport evaluate_robustness(const Model<T>& model, const Dataset& data,
                                     const AttackConfig& config) {
  RobustnessReport r;
  r.clean_acc = clean_accuracy(model, data);
  r.adv_acc = adversarial_accuracy(model, data, config);
  r.n_samples = data.size();
  r.config = config;
  return r;
}

nlohmann::json robustness_to_json(const RobustnessReport& r) {
  return {{"schema_version", kSchemaVersion}, {"clean_acc", r.clean_acc},
          {"adv_acc", r.adv_acc},             {"config", attack_to_json(r.config)},
          {"n_samples", r.n_samples},         {"seed", r.config.seed}};
}

#define AMSREG_INSTANTIATE(T)                                                                       \
  template Tensor<T> loss_input_gradient(const Model<T>&, const Tensor<T>&,                         \
                                         const std::vector<std::size_t>&);                          \
  template Tensor<T> project_linf(const Tensor<T>&, const Tensor<T>&, double);                      \
  template Tensor<T> fgsm(const Model<T>&, const Tensor<T>&, const std::vector<std::size_t>&,       \
                          double);                                                                  \
  template Tensor<T> pgd(const Model<T>&, const Tensor<T>&, const std::vector<std::size_t>&,        \
                         const AttackConfig&);                                                      \
  template Tensor<T> run_attack(const Model<T>&, const Tensor<T>&,                                  \
                                const std::vector<std::size_t>&, const AttackConfig&);              \
  template double clean_accuracy(const Model<T>&, const Dataset&, std::size_t);                     \
  template double adversarial_accuracy(const Model<T>&, const Dataset&, const AttackConfig&,        \
                                       std::size_t);                                                \
  template RobustnessReport evaluate_robustness(const Model<T>&, const Dataset&, const AttackConfig&);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

}  // namespace amsreg
