#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "l2l/attacks.hpp"
#include "l2l/dataset.hpp"
#include "l2l/learned_attack.hpp"
#include "l2l/nets.hpp"

namespace l2l {

struct EvalOptions {
  // Worker threads over sample chunks; results do not depend on it.
  std::size_t threads = 1;
  std::size_t chunk = 64;
};

struct Curve {
  std::string axis;  // "epsilon" or "steps"
  std::vector<std::pair<double, double>> points;

  bool operator==(const Curve&) const = default;
};

struct ChecklistItem {
  std::string name;
  bool passed = false;
  // Not evaluated (missing inputs); never counts as a pass.
  bool skipped = false;
  std::map<std::string, double> measured;
  std::string note;

  bool operator==(const ChecklistItem&) const = default;
};

struct EvalReport {
  double clean_accuracy = 0.0;
  std::map<std::string, double> robust_accuracy;
  std::map<std::string, Curve> curves;
  std::vector<ChecklistItem> checklist;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::string prng;
  std::string mode;  // "fast" or "full"
  // Wall-clock seconds; kept out of the deterministic report body.
  double seconds = 0.0;

  // Accuracies in [0, 1], curve axes strictly increasing.
  void validate() const;
};

double clean_accuracy(const ClassifierNet& net, const Dataset& data,
                      const EvalOptions& opts = {});
double robust_accuracy(const ClassifierNet& net, const Dataset& data, const AttackSpec& attack,
                       std::uint64_t seed, const EvalOptions& opts = {});
double robust_accuracy(const ClassifierNet& net, const Dataset& data,
                       const AttackerNet& attacker, const EvalOptions& opts = {});
// Adversarial inputs crafted on `source`, scored on `target`.
double transfer_accuracy(const ClassifierNet& target, const ClassifierNet& source,
                         const Dataset& data, const AttackSpec& attack, std::uint64_t seed,
                         const EvalOptions& opts = {});

struct TransferResult {
  double robust_accuracy = 0.0;
  // Surrogate architecture differs from the target's.
  bool arch_mismatch = false;
};
TransferResult blackbox_transfer_eval(const ClassifierNet& target, const ClassifierNet& surrogate,
                                      const Dataset& data, const AttackSpec& attack,
                                      std::uint64_t seed, const EvalOptions& opts = {});

EvalReport worst_of_k(std::span<const EvalReport> reports);

enum class SweepAxis { kEpsilon, kSteps };
std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& s);

// Epsilon sweeps run PGM-10 with eta = eps / 10; step sweeps vary T on `base`.
Curve sweep(const ClassifierNet& net, const Dataset& data, SweepAxis axis,
            std::span<const double> values, const AttackSpec& base, std::uint64_t seed,
            const EvalOptions& opts = {});
AttackSpec epsilon_sweep_spec(double eps, const AttackSpec& base);

struct ChecklistConfig {
  AttackSpec base;  // epsilon, eta, init radius and domain of the checks
  std::size_t long_steps = 100;
  std::size_t short_steps = 20;
  std::size_t random_samples = 1000;
  // Unbounded-attack radius; 1 covers the whole unit box.
  double unbounded_epsilon = 1.0;
  double unbounded_threshold = 0.10;
  std::vector<double> sweep_epsilons{0.0, 0.01, 0.02, 0.031, 0.05, 0.1};
  double tolerance = 0.01;
  std::uint64_t seed = 0;
};

// Five gradient-masking red flags; passed = no red flag.
std::vector<ChecklistItem> sanity_checklist(const ClassifierNet& net, const Dataset& data,
                                            const ChecklistConfig& cfg,
                                            const ClassifierNet* surrogate,
                                            const EvalOptions& opts = {});

}  // namespace l2l
