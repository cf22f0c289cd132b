#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2l/learned_attack.hpp"
#include "l2l/nets.hpp"
#include "l2l/optim.hpp"

namespace l2l {

inline constexpr char kCheckpointMagic[8] = {'L', '2', 'L', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { kClassifier = 0, kAttacker = 1 };

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  CheckpointKind kind = CheckpointKind::kClassifier;
  // Canonical JSON of the ArchSpec or attacker description.
  std::string spec_json;
  std::uint64_t epoch = 0;
  std::uint64_t config_hash = 0;
  std::vector<double> params;
  std::vector<double> buffers;
  OptimizerState optimizer;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n,
                      std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s);

std::string arch_to_json(const ArchSpec& spec);
ArchSpec arch_from_json(const std::string& json);

Checkpoint make_checkpoint(const ClassifierNet& net, const OptimizerState& state,
                           std::uint64_t epoch, std::uint64_t config_hash);
Checkpoint make_checkpoint(const AttackerNet& net, const OptimizerState& state,
                           std::uint64_t epoch, std::uint64_t config_hash);

// Copies parameters into an existing network; counts must agree.
void restore_into(ClassifierNet& net, const Checkpoint& c);
void restore_into(AttackerNet& net, const Checkpoint& c);
ClassifierNet restore_classifier(const Checkpoint& c);
AttackerNet restore_attacker(const Checkpoint& c);

}  // namespace l2l
