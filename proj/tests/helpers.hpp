#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2l/rng.hpp"
#include "l2l/tensor.hpp"

namespace l2l::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Values with |v| >= gap, away from relu / sign kinks.
inline Tensor away_from_zero(Shape shape, Rng& rng, double gap = 0.05) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = rng.uniform(gap, 1.0);
    t[i] = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// By value, so range-for over a temporary tensor stays valid.
inline std::vector<double> values(const Tensor& t) { return t.vec(); }

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("l2l_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace l2l::testing
