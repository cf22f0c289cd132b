#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "l2l/eval.hpp"
#include "l2l/tensor.hpp"
#include "l2l/training.hpp"

namespace l2l {

// Full report as JSON; seconds are left out so equal runs give equal bytes.
std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);
// "attack,clean_acc,robust_acc" rows with four decimals.
std::string summary_csv(const EvalReport& r);
// "axis_value,robust_accuracy" rows.
std::string curve_csv(const Curve& c);

// Writes report.json, summary.csv and curve_<name>.csv under dir.
void emit_report(const EvalReport& r, const std::filesystem::path& dir);

std::string trainlog_to_json(const TrainLog& log);
std::string trainlog_csv(const TrainLog& log);

struct PpmImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  bool operator==(const PpmImage&) const = default;
};

std::vector<std::uint8_t> encode_ppm(const PpmImage& img);
PpmImage decode_ppm(const std::vector<std::uint8_t>& bytes);
PpmImage read_ppm(const std::filesystem::path& path);
void write_ppm(const PpmImage& img, const std::filesystem::path& path);

// Tiles a batch [N, C, H, W] (C = 1 or 3) left to right; values clamped to [0, 1].
PpmImage tile_images(const Tensor& batch);
// (x_adv - x) / (2 eps) + 0.5
Tensor difference_image(const Tensor& x, const Tensor& x_adv, double epsilon);

// Writes clean.ppm and, per attack, adv_<name>.ppm and diff_<name>.ppm.
void render_perturbation_grid(const Tensor& x, const std::map<std::string, Tensor>& adversarial,
                              double epsilon, const std::filesystem::path& dir);

}  // namespace l2l
