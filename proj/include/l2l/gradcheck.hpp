#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "l2l/graph.hpp"

namespace l2l {

// Builds a scalar loss from graph inputs bound to the given point.
using ScalarBuilder = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients at `point` with central differences of
// step h: max over coordinates of |a - n| / max(|a|, 1e-8).
GradCheckResult finite_difference_check(const ScalarBuilder& f, const std::vector<Tensor>& point,
                                        double h);

// Scalar sum(out * weights); turns any op output into a loss for checking.
Var project_to_scalar(Graph& g, Var out, const Tensor& weights);

}  // namespace l2l
