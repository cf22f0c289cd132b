#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2l/graph.hpp"
#include "l2l/nets.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

// Closed pixel box [lo, hi].
struct Domain {
  double lo = 0.0;
  double hi = 1.0;
};

Tensor clamp_to_domain(Tensor x, const std::optional<Domain>& domain);
Var clamp_to_domain(Graph& g, Var x, const std::optional<Domain>& domain);

enum class AttackKind { kFgsm, kPgm, kCw, kRandom };
std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::kPgm;
  double epsilon = 0.031;
  double eta = 0.003;
  std::size_t steps = 20;
  double init_radius = 1e-4;
  double kappa = 0.0;
  std::size_t samples = 1000;
  std::optional<Domain> domain;

  void validate() const;
};

// Per-row objective the attacker ascends: (graph, inputs [B, ...], targets
// [B, C]) -> [B]. Rows must not interact.
using Objective = std::function<Var(Graph&, Var x, const Tensor& targets)>;

// Eval-mode classifier objectives.
Objective cross_entropy_objective(const ClassifierNet& net, bool train_mode = false);
Objective margin_objective(const ClassifierNet& net, double kappa, bool train_mode = false);

// Gradient of sum_i obj_i at x. `values` receives the per-row objective.
Tensor objective_gradient(const Objective& obj, const Tensor& x, const Tensor& targets,
                          std::vector<double>* values = nullptr);
std::vector<double> objective_values(const Objective& obj, const Tensor& x,
                                     const Tensor& targets);

// Coordinate clamp to [-eps, eps].
Tensor project_linf(const Tensor& delta, double eps);

Tensor fgsm(const Objective& obj, const Tensor& x, const Tensor& y, double eps,
            const std::optional<Domain>& domain);
Tensor fgsm(const ClassifierNet& net, const Tensor& x, const Tensor& y, double eps,
            const std::optional<Domain>& domain);

// Receives every iterate delta^t, t = 1..T.
using IterateObserver = std::function<void(std::size_t t, const Tensor& delta)>;

// Signed-gradient ascent with projection onto the eps-ball; the random
// start for row i is keyed by (seed, index_offset + i).
Tensor projected_sign_ascent(const Objective& obj, const Tensor& x, const Tensor& y,
                             const AttackSpec& spec, std::uint64_t seed,
                             std::uint64_t index_offset = 0,
                             const IterateObserver& observer = {});

Tensor pgm(const ClassifierNet& net, const Tensor& x, const Tensor& y, const AttackSpec& spec,
           std::uint64_t seed, std::uint64_t index_offset = 0);
Tensor pgm(const Objective& obj, const Tensor& x, const Tensor& y, const AttackSpec& spec,
           std::uint64_t seed, std::uint64_t index_offset = 0,
           const IterateObserver& observer = {});
Tensor cw_attack(const ClassifierNet& net, const Tensor& x, const Tensor& y,
                 const AttackSpec& spec, std::uint64_t seed, std::uint64_t index_offset = 0);

// Candidate perturbations for one sample, in draw order: [n, ...].
Tensor random_attack_candidates(const Shape& sample_shape, double eps, std::size_t n,
                                std::uint64_t key);
std::uint64_t random_attack_key(std::uint64_t seed, std::uint64_t index);

Tensor random_attack(const Objective& obj, const Tensor& x, const Tensor& y, double eps,
                     std::size_t n_samples, std::uint64_t seed,
                     const std::optional<Domain>& domain, std::uint64_t index_offset = 0);
Tensor random_attack(const ClassifierNet& net, const Tensor& x, const Tensor& y, double eps,
                     std::size_t n_samples, std::uint64_t seed,
                     const std::optional<Domain>& domain, std::uint64_t index_offset = 0);

// Dispatch on spec.kind against the eval-mode network. Passing a surrogate
// here crafts transfer examples.
Tensor run_attack(const ClassifierNet& net, const Tensor& x, const Tensor& y,
                  const AttackSpec& spec, std::uint64_t seed, std::uint64_t index_offset = 0);

}  // namespace l2l
