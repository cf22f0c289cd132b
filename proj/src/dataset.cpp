#include "l2l/dataset.hpp"

#include <numeric>

#include "l2l/error.hpp"

namespace l2l {

Shape Dataset::sample_shape() const {
  if (inputs.rank() < 2) return {};
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

std::vector<std::size_t> Dataset::label_indices() const {
  std::vector<std::size_t> out(size());
  const std::size_t c = classes();
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (labels[i * c + j] == 1.0) out[i] = j;
    }
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.inputs = inputs.gather_rows(rows);
  d.labels = labels.gather_rows(rows);
  d.split = split;
  d.domain = domain;
  return d;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> rows(std::min(n, size()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return subset(rows);
}

void Dataset::validate() const {
  if (labels.rank() != 2) throw Error("dataset: labels must be [n, C]");
  if (inputs.rank() < 2 || inputs.dim(0) != labels.dim(0))
    throw Error("dataset: inputs " + shape_str(inputs.shape()) + " and labels " +
                shape_str(labels.shape()) + " disagree");
  const std::size_t c = classes();
  for (std::size_t i = 0; i < size(); ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = labels[i * c + j];
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) throw Error("dataset: label row " + std::to_string(i) + " is not one-hot");
  }
  if (domain) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!(inputs[i] >= domain->lo && inputs[i] <= domain->hi))
        throw Error("dataset: input value " + std::to_string(inputs[i]) + " outside domain");
    }
  }
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  Tensor t({labels.size(), classes}, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes)
      throw Error("one_hot: label " + std::to_string(labels[i]) + " >= class count");
    t[i * classes + labels[i]] = 1.0;
  }
  return t;
}

}  // namespace l2l
