#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "l2l/dataset.hpp"
#include "l2l/nets.hpp"
#include "l2l/training.hpp"

namespace l2l {

struct DataConfig {
  // two_moons | blobs | idx | cifar
  std::string kind = "two_moons";
  std::size_t n_train = 400;
  std::size_t n_test = 200;
  double noise = 0.1;
  // Rescale synthetic features onto [0, 1] and clamp attacks there.
  bool unit_box = false;
  double box_margin = 0.1;
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_file, test_file;
  std::size_t classes = 10;
  // 0 keeps every sample.
  std::size_t max_train = 0;
  std::size_t max_test = 0;
};

struct EvalConfig {
  double epsilon = 0.031;
  double eta = 0.003;
  double init_radius = 1e-4;
  double kappa = 0.0;
  bool fgsm = true;
  std::vector<std::size_t> pgm_steps{20, 100};
  std::vector<std::size_t> cw_steps{100};
  std::size_t random_samples = 100000;
  std::size_t fast_random_samples = 1000;
  // Test subset size in fast mode.
  std::size_t fast_max_samples = 200;
  bool learned_attacker = true;
  std::vector<double> sweep_epsilons;
  std::vector<double> sweep_steps;
  bool checklist = false;
  std::size_t threads = 1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ArchSpec arch;
  // Architecture input shape given explicitly (otherwise taken from data).
  bool arch_input_set = false;
  TrainConfig train;
  EvalConfig eval;
};

// Throws l2l::Error naming the offending field; unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Canonical JSON of the effective configuration (defaults filled in).
std::string canonical_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

struct DataSplits {
  Dataset train;
  Dataset test;
  // Minimum inter-class l_inf gap of the noise-free generator, when synthetic.
  std::optional<double> clean_gap;
};

// n rows spread evenly over the dataset (synthetic data is class-ordered).
Dataset take_evenly(const Dataset& data, std::size_t n);
// Run seed; training draws from the same value.
void set_seed(RunConfig& cfg, std::uint64_t seed);

// Loads or generates both splits; all randomness derives from cfg.seed.
DataSplits load_data(const RunConfig& cfg);
// Fills the arch input shape from the data when it was not given.
ArchSpec resolve_arch(const RunConfig& cfg, const Dataset& train);

}  // namespace l2l
