#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amsreg/attacks.hpp"
#include "amsreg/data.hpp"
#include "amsreg/landscape.hpp"
#include "amsreg/model.hpp"
#include "amsreg/rng.hpp"

namespace amsreg {

enum class DefenseMode { none, adversarial_training, jacobian_reg, ams_reg };

std::string_view defense_mode_name(DefenseMode mode);
DefenseMode parse_defense_mode(std::string_view name);

// `lambda` is the regularization weight (the mu of the joint objective).
struct DefenseConfig {
  DefenseMode mode = DefenseMode::none;
  // Inner attack for adversarial training; 10 PGD steps by default.
  AttackConfig attack = default_training_attack();
  // Train on clean and adversarial copies of each batch instead of the
  // adversarial copy alone.
  bool mix_clean = false;
  double lambda = 0.0;
  std::size_t n_proj = 1;
  // Treat p(c|x) in the weighted Jacobian as a constant when differentiating
  // the penalty with respect to the parameters.
  bool detach_probs = false;

  static AttackConfig default_training_attack();
  bool regularized() const { return mode == DefenseMode::jacobian_reg || mode == DefenseMode::ams_reg; }
  // Throws ConfigError.
  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  // 1-based epochs after which the rate is multiplied by decay_factor.
  std::vector<std::size_t> lr_decay_epochs{30, 45};
  double decay_factor = 0.1;
  std::uint64_t seed = 0;

  // Learning rate used during 1-based `epoch`.
  double lr_at(std::size_t epoch) const;
  // Throws ConfigError.
  void validate() const;
};

nlohmann::json defense_to_json(const DefenseConfig& d);
DefenseConfig defense_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& t);
TrainConfig train_config_from_json(const nlohmann::json& j);

enum class JacobianKind { plain, weighted };

struct ProjectionEstimate {
  double value = 0.0;
  std::size_t n_proj = 0;
  JacobianKind kind = JacobianKind::plain;
};

// Per-sample estimate of ||J||_F^2 (plain) or ||diag(p) J||_F^2 (weighted)
// for J = df/dx, as (C / n_proj) sum_mu ||v_mu^T M||^2 with v_mu uniform on
// the unit sphere of R^C. Returns a [B] tensor; with create_graph it stays
// differentiable with respect to the parameters.
template <typename T>
Tensor<T> projected_frobenius(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                              JacobianKind kind, Rng& rng, bool create_graph, bool detach_probs = false);

template <typename T>
ProjectionEstimate jacobian_frob_estimate(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                                          std::uint64_t seed);
template <typename T>
ProjectionEstimate ams_frob_estimate(const Model<T>& model, const Tensor<T>& x, std::size_t n_proj,
                                     std::uint64_t seed);

// Sum over the C standard basis projections e_c^T M (no C/n scaling), which
// recovers the squared Frobenius norm exactly.
template <typename T>
double frobenius_basis_exhaustive(const Model<T>& model, const Tensor<T>& x, JacobianKind kind);

// The same norm from the explicit K x D Jacobian, weighted row by row.
template <typename T>
double frobenius_exact(const Model<T>& model, const Tensor<T>& x, JacobianKind kind);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// ||d log p / dx||^2 <= C ||diag(p) J||_F^2, both sides computed exactly.
template <typename T>
BoundCheck verify_prop31(const Model<T>& model, const Tensor<T>& x);

// Summed cross-entropy plus lambda/2 times the batch mean of the penalty.
// Projections are drawn from `seed`; none and adversarial_training give the
// plain summed cross-entropy of the batch as given.
template <typename T>
Tensor<T> joint_loss(const Model<T>& model, const Tensor<T>& x, const std::vector<std::size_t>& labels,
                     const DefenseConfig& defense, std::uint64_t seed);

// Heavy-ball SGD: v = momentum * v + g, theta -= lr * v.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}
  // Consumes and clears the accumulated gradients of `params`.
  void step(std::vector<Tensor<T>>& params, double lr);

 private:
  double momentum_;
  std::vector<std::vector<T>> velocity_;
};

// One optimisation step on the batch; returns the batch objective (joint loss
// divided by the number of rows trained on).
template <typename T>
double train_step(Model<T>& model, SgdMomentum<T>& opt, const Tensor<T>& x,
                  const std::vector<std::size_t>& labels, const DefenseConfig& defense, double lr,
                  std::uint64_t seed);

// Replaces the batch with attack examples against the current parameters (or
// appends them to the clean batch when mix_clean) and takes a CE step.
template <typename T>
double adversarial_train_step(Model<T>& model, SgdMomentum<T>& opt, const Tensor<T>& x,
                              const std::vector<std::size_t>& labels, const AttackConfig& attack,
                              bool mix_clean, double lr);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double clean_acc = 0.0;
  std::optional<double> phi;
  double lr = 0.0;
};

nlohmann::json epoch_to_json(const EpochMetrics& m);

// Fixed samples on which Phi is tracked after every epoch.
struct FlatnessProbe {
  Dataset data;
  std::size_t n_planes = 1;
  GridSpec grid;
  std::uint64_t seed = 0;
};

template <typename T>
struct TrainResult {
  Model<T> model;
  std::vector<EpochMetrics> log;
};

// Throws TrainingError (with the 1-based epoch) when the loss or parameters
// stop being finite.
template <typename T>
TrainResult<T> train(Model<T> model, const Dataset& data, const TrainConfig& config,
                     const DefenseConfig& defense, const std::optional<FlatnessProbe>& probe = std::nullopt,
                     const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace amsreg
