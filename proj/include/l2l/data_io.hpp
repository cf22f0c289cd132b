#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2l/dataset.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

// Raw unsigned-byte IDX payload.
struct IdxArray {
  Shape shape;
  std::vector<std::uint8_t> bytes;
};

IdxArray read_idx_bytes(const std::filesystem::path& path);
IdxArray parse_idx(const std::vector<std::uint8_t>& file);
void write_idx(const std::filesystem::path& path, const IdxArray& a);
std::vector<std::uint8_t> encode_idx(const IdxArray& a);
// Pixel bytes scaled by 1/255.
Tensor load_idx(const std::filesystem::path& path);

// Images [n, H, W] (or [n, C, H, W]) and labels [n]; inputs gain a channel
// axis when missing. Domain [0, 1].
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes);

inline constexpr std::size_t kCifarRecord = 3073;
Dataset parse_cifar_binary(const std::vector<std::uint8_t>& file, std::size_t classes = 10);
Dataset load_cifar_binary(const std::filesystem::path& path, std::size_t classes = 10);

enum class SynthKind { kBlobs, kTwoMoons };
std::string to_string(SynthKind k);
SynthKind parse_synth_kind(const std::string& s);

// Balanced two-class 2-D data, class 0 first. No domain.
Dataset synth_dataset(SynthKind kind, std::size_t n, double noise, std::uint64_t seed);

// Smallest l_inf distance between samples of different classes.
double min_interclass_linf_gap(const Dataset& data);

// Per-feature affine map onto [0, 1].
struct BoxMap {
  std::vector<double> lo;
  std::vector<double> scale;
};
// Maps [min - margin*range, max + margin*range] of each feature onto [0, 1].
BoxMap fit_unit_box(const Dataset& data, double margin);
// Applies the map, clamps into [0, 1] and declares that domain.
Dataset apply_unit_box(const Dataset& data, const BoxMap& map);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace l2l
