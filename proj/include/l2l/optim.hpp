#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "l2l/layers.hpp"

namespace l2l {

enum class OptimizerKind { kNone, kSgd, kAdam };
std::string to_string(OptimizerKind k);

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  // Epochs at which lr is multiplied by decay_rate.
  std::vector<std::size_t> decay_epochs{30, 60, 90};
  double decay_rate = 0.1;

  double lr_at(std::size_t epoch) const;
  void validate(const std::string& where) const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 2e-4;

  void validate(const std::string& where) const;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kNone;
  // Momentum buffer (sgd) or first moment (adam).
  std::vector<double> m;
  // Second moment (adam).
  std::vector<double> v;
  std::uint64_t step = 0;

  bool operator==(const OptimizerState&) const = default;
};

// g' = g + wd*theta; v <- mu*v + g'; theta <- theta - lr*v
void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              double lr, const SgdConfig& cfg);
// Bias-corrected Adam with L2 weight decay folded into the gradient.
void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               const AdamConfig& cfg);

// Steps every learnable tensor of `ps` from its accumulated gradient.
// `ascent` flips the gradient sign.
void sgd_step(ParameterSet& ps, OptimizerState& state, double lr, const SgdConfig& cfg);
void adam_step(ParameterSet& ps, OptimizerState& state, const AdamConfig& cfg, bool ascent);

}  // namespace l2l
