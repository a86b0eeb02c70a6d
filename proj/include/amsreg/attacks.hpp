#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amsreg/data.hpp"
#include "amsreg/model.hpp"

namespace amsreg {

enum class AttackKind { fgsm, pgd };

std::string_view attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

// l-infinity attack in input units ([0,1] pixels).
struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  double eps = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  std::size_t iters = 5;
  // Uniform start inside the eps-ball, drawn from `seed`.
  bool random_start = false;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// "pgd-cifar" (8/255, 5 steps of 2/255), "pgd-fmnist" (25/255, 10 steps of
// 6.25/255), "fgsm" (eps required). An eps override rescales nothing else.
AttackConfig attack_preset(std::string_view name, std::optional<double> eps = std::nullopt);

nlohmann::json attack_to_json(const AttackConfig& config);
AttackConfig attack_from_json(const nlohmann::json& j);

// Gradient of the summed cross-entropy with respect to the input batch.
// Parameters are not differentiated.
template <typename T>
Tensor<T> loss_input_gradient(const Model<T>& model, const Tensor<T>& x,
                              const std::vector<std::size_t>& labels);

// Clips `candidate` to the eps-ball around x, then to [0,1]. The ball bounds
// are nudged so that |out - x| <= eps holds when evaluated in T.
template <typename T>
Tensor<T> project_linf(const Tensor<T>& candidate, const Tensor<T>& x, double eps);

template <typename T>
Tensor<T> fgsm(const Model<T>& model, const Tensor<T>& x, const std::vector<std::size_t>& labels,
               double eps);

template <typename T>
Tensor<T> pgd(const Model<T>& model, const Tensor<T>& x, const std::vector<std::size_t>& labels,
              const AttackConfig& config);

template <typename T>
Tensor<T> run_attack(const Model<T>& model, const Tensor<T>& x,
                     const std::vector<std::size_t>& labels, const AttackConfig& config);

template <typename T>
double clean_accuracy(const Model<T>& model, const Dataset& data, std::size_t batch_size = 256);

// Fraction of samples still classified correctly after the attack. eps = 0
// skips the attack and gives the clean accuracy.
template <typename T>
double adversarial_accuracy(const Model<T>& model, const Dataset& data, const AttackConfig& config,
                            std::size_t batch_size = 256);

struct RobustnessReport {
  double clean_acc = 0.0;
  double adv_acc = 0.0;
  std::size_t n_samples = 0;
  AttackConfig config;
};

template <typename T>
RobustnessReport evaluate_robustness(const Model<T>& model, const Dataset& data,
                                     const AttackConfig& config);

nlohmann::json robustness_to_json(const RobustnessReport& report);

}  // namespace amsreg
