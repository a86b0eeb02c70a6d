#include "amsreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "amsreg/errors.hpp"
#include "amsreg/flatness.hpp"
#include "amsreg/likelihood.hpp"
#include "amsreg/losses.hpp"
#include "amsreg/ops.hpp"

namespace amsreg {

namespace {

template <typename T>
Tensor<T> input_leaf(const Tensor<T>& x) {
  Tensor<T> leaf = x.detach();
  leaf.set_requires_grad(true);
  return leaf;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return s;
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  std::vector<T> values(a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  Shape s = a.shape();
  s[0] += b.dim(0);
  return Tensor<T>(std::move(s), std::move(values));
}

}  // namespace

std::string_view defense_mode_name(DefenseMode mode) {
  switch (mode) {
    case DefenseMode::none: return "none";
    case DefenseMode::adversarial_training: return "adversarial_training";
    case DefenseMode::jacobian_reg: return "jacobian_reg";
    case DefenseMode::ams_reg: return "ams_reg";
  }
  return "none";
}

DefenseMode parse_defense_mode(std::string_view name) {
  if (name == "none") return DefenseMode::none;
  if (name == "adversarial_training" || name == "at") return DefenseMode::adversarial_training;
  if (name == "jacobian_reg" || name == "jacobian") return DefenseMode::jacobian_reg;
  if (name == "ams_reg" || name == "amsreg") return DefenseMode::ams_reg;
  throw ConfigError("unknown defense mode '" + std::string(name) + "'");
}

AttackConfig DefenseConfig::default_training_attack() {
  AttackConfig a;
  a.iters = 10;
  return a;
}

void DefenseConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (n_proj < 1) throw ConfigError("n_proj must be >= 1");
  if (mode == DefenseMode::adversarial_training) attack.validate();
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double lr = learning_rate;
  for (std::size_t d : lr_decay_epochs) {
    if (epoch > d) lr *= decay_factor;
  }
  return lr;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must be in (0, 1]");
  for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
    const std::size_t d = lr_decay_epochs[i];
    if (d < 1 || d > epochs) throw ConfigError("lr decay epoch " + std::to_string(d) + " outside [1, epochs]");
    if (i > 0 && d <= lr_decay_epochs[i - 1]) throw ConfigError("lr decay epochs must be strictly increasing");
  }
}

nlohmann::json defense_to_json(const DefenseConfig& d) {
  return {{"mode", defense_mode_name(d.mode)}, {"attack", attack_to_json(d.attack)},
          {"mix_clean", d.mix_clean},          {"lambda", d.lambda},
          {"n_proj", d.n_proj},                {"detach_probs", d.detach_probs}};
}

DefenseConfig defense_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"mode", "attack", "mix_clean", "lambda", "n_proj", "detach_probs"}, "defense");
  DefenseConfig d;
  try {
    if (j.contains("mode")) d.mode = parse_defense_mode(j.at("mode").get<std::string>());
    if (j.contains("attack")) {
      nlohmann::json a = attack_to_json(d.attack);
      if (j.at("attack").contains("preset")) a = nlohmann::json::object();
      a.update(j.at("attack"));
      d.attack = attack_from_json(a);
    }
    d.mix_clean = j.value("mix_clean", d.mix_clean);
    d.lambda = j.value("lambda", d.lambda);
    d.n_proj = j.value("n_proj", d.n_proj);
    d.detach_probs = j.value("detach_probs", d.detach_probs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid defense config: ") + e.what());
  }
  d.validate();
  return d;
}

nlohmann::json train_config_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"momentum", t.momentum},
          {"lr_decay_epochs", t.lr_decay_epochs},
          {"decay_factor", t.decay_factor},
          {"seed", t.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(
      j, {"epochs", "batch_size", "learning_rate", "momentum", "lr_decay_epochs", "decay_factor", "seed"},
      "train");
  TrainConfig t;
  try {
    t.epochs = j.value("epochs", t.epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.momentum = j.value("momentum", t.momentum);
    if (j.contains("lr_decay_epochs")) {
      t.lr_decay_epochs = j.at("lr_decay_epochs").get<std::vector<std::size_t>>();
    } else if (t.epochs != 60) {
      // Keep the default schedule proportional to the run length.
      t.lr_decay_epochs.clear();
      for (std::size_t d : {t.epochs / 2, t.epochs * 3 / 4}) {
        if (d >= 1 && (t.lr_decay_epochs.empty() || d > t.lr_decay_epochs.back())) t.lr_decay_epochs.push_back(d);
      }
    }
    t.decay_factor = j.value("decay_factor", t.decay_factor);
    t.seed = j.value("seed", t.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  t.validate();
  return t;
}

template <typename T>
Tensor<T> projected_frobenius(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                              JacobianKind kind, Rng& rng, bool create_graph, bool detach_probs) {
  if (n_proj < 1) throw ConfigError("n_proj must be >= 1");
  const Tensor<T> input = input_leaf(as_batch(model, x));
  const Tensor<T> logits = model.forward(input);
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  const std::size_t d = input.numel() / b;
  Tensor<T> probs;
  if (kind == JacobianKind::weighted) {
    probs = (detach_probs || !create_graph) ? softmax(logits.detach(), 1) : softmax(logits, 1);
  }
  Tensor<T> total;
  for (std::size_t mu = 0; mu < n_proj; ++mu) {
    std::vector<T> v;
    v.reserve(b * k);
    for (std::size_t r = 0; r < b; ++r) {
      for (double e : unit_sphere(rng, k)) v.push_back(static_cast<T>(e));
    }
    Tensor<T> seed(logits.shape(), std::move(v));
    if (kind == JacobianKind::weighted) seed = mul(seed, probs);
    const Tensor<T> g = grad(logits, input, seed, create_graph);
    const Tensor<T> sq = sum_axis(square(reshape(g, {b, d})), 1);
    total = total.defined() ? add(total, sq) : sq;
  }
  return scale(total, static_cast<T>(static_cast<double>(k) / static_cast<double>(n_proj)));
}

namespace {

template <typename T>
ProjectionEstimate frob_estimate(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                                 std::uint64_t seed, JacobianKind kind) {
  if (as_batch(model, x).dim(0) != 1) throw DimensionError("frobenius estimate expects a single sample");
  Rng rng(seed);
  const Tensor<T> est = projected_frobenius(model, x, n_proj, kind, rng, false);
  return {static_cast<double>(est.item()), n_proj, kind};
}

// Probabilities of a single sample, in double.
template <typename T>
std::vector<double> sample_probs(const Model<T>& model, const Tensor<T>& x) {
  NoGradGuard no_grad;
  const Tensor<T> p = softmax(model.forward(as_batch(model, x)), 1);
  return {p.values().begin(), p.values().end()};
}

}  // namespace

template <typename T>
ProjectionEstimate jacobian_frob_estimate(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                                          std::uint64_t seed) {
  return frob_estimate(model, x, n_proj, seed, JacobianKind::plain);
}

template <typename T>
ProjectionEstimate ams_frob_estimate(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                                     std::uint64_t seed) {
  return frob_estimate(model, x, n_proj, seed, JacobianKind::weighted);
}

template <typename T>
double frobenius_basis_exhaustive(const Model<T>& model, const Tensor<T>& x, JacobianKind kind) {
  const Tensor<T> input = input_leaf(as_batch(model, x));
  if (input.dim(0) != 1) throw DimensionError("frobenius_basis_exhaustive expects a single sample");
  const Tensor<T> logits = model.forward(input);
  const std::size_t k = logits.dim(1);
  const std::vector<double> p = kind == JacobianKind::weighted ? sample_probs(model, x) : std::vector<double>(k, 1.0);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<T> e(k, T(0));
    e[c] = static_cast<T>(p[c]);
    const Tensor<T> g = grad(logits, input, Tensor<T>(logits.shape(), std::move(e)));
    for (T v : g.values()) total += static_cast<double>(v) * static_cast<double>(v);
  }
  return total;
}

template <typename T>
double frobenius_exact(const Model<T>& model, const Tensor<T>& x, JacobianKind kind) {
  const Tensor<T> jac = input_jacobian(model, x);
  const std::size_t k = jac.dim(0), d = jac.dim(1);
  const std::vector<double> p = kind == JacobianKind::weighted ? sample_probs(model, x) : std::vector<double>(k, 1.0);
  const auto jv = jac.values();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double row = 0.0;
    for (std::size_t i = 0; i < d; ++i) row += static_cast<double>(jv[c * d + i]) * static_cast<double>(jv[c * d + i]);
    total += p[c] * p[c] * row;
  }
  return total;
}

template <typename T>
BoundCheck verify_prop31(const Model<T>& model, const Tensor<T>& x) {
  const Tensor<T> g = likelihood_gradient(model, x);
  const std::vector<double> gv(g.values().begin(), g.values().end());
  BoundCheck out;
  out.lhs = squared_norm(gv);
  out.rhs = static_cast<double>(model.num_classes()) * frobenius_exact(model, x, JacobianKind::weighted);
  out.holds = out.lhs <= out.rhs + 1e-9 * std::max(out.rhs, std::numeric_limits<double>::min());
  return out;
}

template <typename T>
Tensor<T> joint_loss(const Model<T>& model, const Tensor<T>& x, const std::vector<std::size_t>& labels,
                     const DefenseConfig& defense, std::uint64_t seed) {
  const Tensor<T> ce = cross_entropy_sum(model.forward(x), labels);
  if (!defense.regularized() || defense.lambda == 0.0) return ce;
  Rng rng(seed);
  const JacobianKind kind = defense.mode == DefenseMode::ams_reg ? JacobianKind::weighted : JacobianKind::plain;
  const Tensor<T> penalty = projected_frobenius(model, x, defense.n_proj, kind, rng, true, defense.detach_probs);
  return add(ce, scale(mean(penalty), static_cast<T>(defense.lambda / 2.0)));
}

template <typename T>
void SgdMomentum<T>::step(std::vector<Tensor<T>>& params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto& p : params) velocity_.emplace_back(p.numel(), T(0));
  }
  const T mu = static_cast<T>(momentum_);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = params[i].grad();
    auto& v = velocity_[i];
    auto theta = params[i].mutable_values();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = mu * v[j] + (g ? g->values()[j] : T(0));
      theta[j] -= rate * v[j];
    }
    params[i].zero_grad();
  }
}

template <typename T>
double train_step(Model<T>& model, SgdMomentum<T>& opt, const Tensor<T>& x,
                  const std::vector<std::size_t>& labels, const DefenseConfig& defense, double lr,
                  std::uint64_t seed) {
  if (defense.mode == DefenseMode::adversarial_training) {
    AttackConfig attack = defense.attack;
    attack.seed = derive_seed(attack.seed, seed);
    return adversarial_train_step(model, opt, x, labels, attack, defense.mix_clean, lr);
  }
  for (auto& p : model.parameters()) p.zero_grad();
  const Tensor<T> loss =
      scale(joint_loss(model, x, labels, defense, seed), T(1) / static_cast<T>(labels.size()));
  backward(loss);
  opt.step(model.parameters(), lr);
  return static_cast<double>(loss.item());
}

template <typename T>
double adversarial_train_step(Model<T>& model, SgdMomentum<T>& opt, const Tensor<T>& x,
                              const std::vector<std::size_t>& labels, const AttackConfig& attack,
                              bool mix_clean, double lr) {
  attack.validate();
  const Tensor<T> adv = run_attack(model, x, labels, attack);
  Tensor<T> inputs = adv;
  std::vector<std::size_t> targets = labels;
  if (mix_clean) {
    inputs = concat_rows(x.detach(), adv);
    targets.insert(targets.end(), labels.begin(), labels.end());
  }
  return train_step(model, opt, inputs, targets, DefenseConfig{}, lr, 0);
}

nlohmann::json epoch_to_json(const EpochMetrics& m) {
  nlohmann::json j{{"epoch", m.epoch}, {"loss", m.loss}, {"clean_acc", m.clean_acc}, {"lr", m.lr}};
  if (m.phi) j["phi"] = *m.phi;
  return j;
}

template <typename T>
TrainResult<T> train(Model<T> model, const Dataset& data, const TrainConfig& config,
                     const DefenseConfig& defense, const std::optional<FlatnessProbe>& probe,
                     const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  defense.validate();
  if (config.epochs > 0 && data.empty()) throw InputError("training set is empty");
  if (!data.empty() && data.sample_shape != model.input_shape()) {
    throw DimensionError("dataset sample shape " + shape_str(data.sample_shape) + " != model input " +
                         shape_str(model.input_shape()));
  }
  TrainResult<T> result{std::move(model), {}};
  Model<T>& m = result.model;
  SgdMomentum<T> opt(config.momentum);
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, epoch));
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, stop - start);
        const double loss = train_step(m, opt, data.batch<T>(idx), data.batch_labels(idx), defense, lr,
                                       derive_seed(derive_seed(config.seed, 1u << 20 | epoch), batch_index));
        if (!std::isfinite(loss)) throw NumericError("non-finite loss");
        loss_sum += loss * static_cast<double>(idx.size());
      }
    } catch (const NumericError& e) {
      throw TrainingError(std::string("training diverged: ") + e.what(), static_cast<int>(epoch));
    }
    if (!m.parameters_finite()) throw TrainingError("training diverged: non-finite parameters", static_cast<int>(epoch));
    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.loss = loss_sum / static_cast<double>(order.size());
    metrics.clean_acc = clean_accuracy(m, data);
    metrics.lr = lr;
    if (probe) metrics.phi = dataset_flatness(m, probe->data, probe->n_planes, probe->grid, probe->seed).Phi;
    if (on_epoch) on_epoch(metrics);
    result.log.push_back(std::move(metrics));
  }
  return result;
}

#define AMSREG_INSTANTIATE(T)                                                                       \
  template Tensor<T> projected_frobenius(const Model<T>&, const Tensor<T>&, std::size_t, JacobianKind, \
                                         Rng&, bool, bool);                                         \
  template ProjectionEstimate jacobian_frob_estimate(const Model<T>&, const Tensor<T>&, std::size_t,  \
                                                     std::uint64_t);                                \
  template ProjectionEstimate ams_frob_estimate(const Model<T>&, const Tensor<T>&, std::size_t,       \
                                                std::uint64_t);                                     \
  template double frobenius_basis_exhaustive(const Model<T>&, const Tensor<T>&, JacobianKind);        \
  template double frobenius_exact(const Model<T>&, const Tensor<T>&, JacobianKind);                   \
  template BoundCheck verify_prop31(const Model<T>&, const Tensor<T>&);                               \
  template Tensor<T> joint_loss(const Model<T>&, const Tensor<T>&, const std::vector<std::size_t>&,   \
                                const DefenseConfig&, std::uint64_t);                               \
  template class SgdMomentum<T>;                                                                    \
  template double train_step(Model<T>&, SgdMomentum<T>&, const Tensor<T>&,                          \
                             const std::vector<std::size_t>&, const DefenseConfig&, double,         \
                             std::uint64_t);                                                        \
  template double adversarial_train_step(Model<T>&, SgdMomentum<T>&, const Tensor<T>&,              \
                                         const std::vector<std::size_t>&, const AttackConfig&, bool,  \
                                         double);                                                   \
  template TrainResult<T> train(Model<T>, const Dataset&, const TrainConfig&, const DefenseConfig&,   \
                                const std::optional<FlatnessProbe>&,                                \
                                const std::function<void(const EpochMetrics&)>&);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

}  // namespace amsreg
