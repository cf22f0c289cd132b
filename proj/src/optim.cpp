#include "l2l/optim.hpp"

#include <cmath>

#include "l2l/error.hpp"

namespace l2l {
namespace {

void check_finite(std::span<const double> grads, const char* who) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw DivergenceError(std::string(who) + ": non-finite gradient at parameter " +
                            std::to_string(i));
    }
  }
}

void prepare(OptimizerState& state, OptimizerKind kind, std::size_t n, const char* who) {
  if (state.kind == OptimizerKind::kNone) {
    state.kind = kind;
    state.m.assign(n, 0.0);
    if (kind == OptimizerKind::kAdam) state.v.assign(n, 0.0);
    state.step = 0;
  }
  if (state.kind != kind) throw Error(std::string(who) + ": optimizer state has another kind");
  if (state.m.size() != n || (kind == OptimizerKind::kAdam && state.v.size() != n)) {
    throw Error(std::string(who) + ": state holds " + std::to_string(state.m.size()) +
                " entries for " + std::to_string(n) + " parameters");
  }
}

}  // namespace

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kNone: return "none";
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdam: return "adam";
  }
  return "none";
}

double SgdConfig::lr_at(std::size_t epoch) const {
  double lr_e = lr;
  for (std::size_t e : decay_epochs) {
    if (epoch >= e) lr_e *= decay_rate;
  }
  return lr_e;
}

void SgdConfig::validate(const std::string& where) const {
  if (!(lr > 0.0)) throw Error(where + ".lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(where + ".momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error(where + ".weight_decay must be >= 0");
  if (!(decay_rate > 0.0)) throw Error(where + ".decay_rate must be > 0");
}

void AdamConfig::validate(const std::string& where) const {
  if (!(lr > 0.0)) throw Error(where + ".lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error(where + ".beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw Error(where + ".beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw Error(where + ".eps must be > 0");
  if (!(weight_decay >= 0.0)) throw Error(where + ".weight_decay must be >= 0");
}

void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              double lr, const SgdConfig& cfg) {
  if (params.size() != grads.size()) throw Error("sgd: parameter and gradient sizes differ");
  check_finite(grads, "sgd");
  prepare(state, OptimizerKind::kSgd, params.size(), "sgd");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + cfg.weight_decay * params[i];
    state.m[i] = cfg.momentum * state.m[i] + g;
    params[i] -= lr * state.m[i];
  }
  ++state.step;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw Error("adam: parameter and gradient sizes differ");
  check_finite(grads, "adam");
  prepare(state, OptimizerKind::kAdam, params.size(), "adam");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + cfg.weight_decay * params[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
}

void sgd_step(ParameterSet& ps, OptimizerState& state, double lr, const SgdConfig& cfg) {
  std::vector<double> p = ps.flat();
  const std::vector<double> g = ps.flat_grad();
  sgd_step(p, g, state, lr, cfg);
  ps.set_flat(p);
}

void adam_step(ParameterSet& ps, OptimizerState& state, const AdamConfig& cfg, bool ascent) {
  std::vector<double> p = ps.flat();
  std::vector<double> g = ps.flat_grad();
  if (ascent) {
    for (double& v : g) v = -v;
  }
  adam_step(p, g, state, cfg);
  ps.set_flat(p);
}

}  // namespace l2l
