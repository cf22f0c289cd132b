#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2l/dataset.hpp"
#include "l2l/learned_attack.hpp"
#include "l2l/nets.hpp"
#include "l2l/optim.hpp"

namespace l2l {

enum class TrainMode { kPlain, kDroPgm, kL2lDro, kAit, kL2lAit };
std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);
bool uses_attacker(TrainMode m);

struct TrainConfig {
  TrainMode mode = TrainMode::kPlain;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  SgdConfig classifier;
  AdamConfig attacker;
  double epsilon = 0.031;
  double eta = 0.007;
  std::size_t steps = 10;
  double init_radius = 1e-4;
  double epsilon_y = 0.5;
  // Defaults to the classifier's penultimate layer.
  std::optional<std::size_t> feature_tap;
  AttackerVariant variant = AttackerVariant::kGrad;
  double attacker_width = 0.25;
  // Keeps phi at its initial value.
  bool freeze_attacker = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double clean_accuracy = 0.0;
  std::optional<double> robust_accuracy;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  ClassifierNet net;
  std::optional<AttackerNet> attacker;
  OptimizerState classifier_state;
  OptimizerState attacker_state;
  TrainLog log;
  std::size_t epochs_done = 0;
};

// Everything one theta update consumed.
struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  const Tensor& clean;
  const Tensor& adversarial;
  const Tensor& targets;
  // Partner inputs for interpolation modes.
  const Tensor* partner = nullptr;
  double loss = 0.0;
};
using BatchObserver = std::function<void(const BatchRecord&)>;

// y~ = (1 - eps_y) y_i + eps_y (1 - y_j) / (C - 1).
std::vector<double> mixup_label(std::span<const double> y_i, std::span<const double> y_j,
                                double epsilon_y, std::size_t classes);
Tensor mixup_labels(const Tensor& y_i, const Tensor& y_j, double epsilon_y);

struct CosineResult {
  std::vector<double> q;
  std::size_t zero_norm = 0;
};
// Row-wise cosine similarity of layer-s features (eval mode).
CosineResult cosine_feature_similarity(const ClassifierNet& net, std::size_t s,
                                       const Tensor& x_a, const Tensor& x_b);

// Partner index per row: uniform in [0, n) with j != i (j = i when n = 1).
std::vector<std::size_t> sample_partners(std::size_t n, std::uint64_t key);

// Fresh network (and attacker when the mode uses one) built from cfg.seed.
TrainResult init_training(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data);
// Runs epochs [result.epochs_done, cfg.epochs).
void run_training(const TrainConfig& cfg, const Dataset& data, TrainResult& result,
                  const BatchObserver& observer = {});

TrainResult train(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                  const BatchObserver& observer = {});
TrainResult train_plain(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                        const BatchObserver& observer = {});
TrainResult train_dro_pgm(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                          const BatchObserver& observer = {});
TrainResult train_l2l_dro(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                          const BatchObserver& observer = {});
TrainResult train_ait(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                      const BatchObserver& observer = {});
TrainResult train_l2l_ait(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                          const BatchObserver& observer = {});

// Single minibatch pieces of the learned-attacker modes, shared by the
// training loop and by fixed-batch checks.
struct L2lBatchOptions {
  bool update_classifier = true;
  bool update_attacker = true;
  double classifier_lr = 0.1;
};

// Mean CE(f(x + delta), y) with delta from the current attacker; theta and
// phi untouched. Batch norm runs on batch statistics.
double l2l_dro_objective(const TrainConfig& cfg, const TrainResult& state, const Tensor& x,
                         const Tensor& y, const std::optional<Domain>& domain);
// theta step, then phi ascent step. Returns the loss and x + delta.
double l2l_dro_batch(const TrainConfig& cfg, TrainResult& state, const Tensor& x,
                     const Tensor& y, const std::optional<Domain>& domain,
                     const L2lBatchOptions& opts, Tensor* adversarial = nullptr);

// Mean q(x + delta, x_j) for the current attacker.
double l2l_ait_objective(const TrainConfig& cfg, const TrainResult& state, const Tensor& x,
                         const Tensor& partner, const std::optional<Domain>& domain);
// phi descent step on q, then theta step on CE(f(x + delta), y~).
double l2l_ait_batch(const TrainConfig& cfg, TrainResult& state, const Tensor& x,
                     const Tensor& partner, const Tensor& mixed_targets,
                     const std::optional<Domain>& domain, const L2lBatchOptions& opts,
                     Tensor* adversarial = nullptr);

}  // namespace l2l
