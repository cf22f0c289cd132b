#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l2l/attacks.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

struct Dataset {
  // [n, d] or [n, C, H, W].
  Tensor inputs;
  // One-hot [n, C].
  Tensor labels;
  std::string split = "train";
  // Value box of the inputs; unbounded when empty.
  std::optional<Domain> domain;

  std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.dim(0); }
  std::size_t classes() const { return labels.rank() == 2 ? labels.dim(1) : 0; }
  Shape sample_shape() const;
  std::vector<std::size_t> label_indices() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  // First min(n, size()) samples.
  Dataset head(std::size_t n) const;

  // One-hot rows, matching sizes, inputs inside the declared domain.
  void validate() const;
};

Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes);

}  // namespace l2l
