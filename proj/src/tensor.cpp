#include "l2l/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "l2l/error.hpp"

namespace l2l {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw Error("tensor: shape " + shape_str(shape_) + " does not match " +
                std::to_string(data_.size()) + " values");
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error("tensor: item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw Error("tensor: cannot reshape " + shape_str(shape_) + " to " +
                shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

std::size_t Tensor::row_size() const {
  if (shape_.empty()) throw Error("tensor: row access on a scalar");
  return shape_[0] == 0 ? shape_numel(Shape(shape_.begin() + 1, shape_.end()))
                        : data_.size() / shape_[0];
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > shape_.at(0)) throw Error("tensor: bad row slice");
  const std::size_t rs = row_size();
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(s, std::vector<double>(data_.begin() + begin * rs,
                                       data_.begin() + end * rs));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
  const std::size_t rs = row_size();
  Shape s = shape_;
  s[0] = rows.size();
  std::vector<double> out;
  out.reserve(rows.size() * rs);
  for (std::size_t r : rows) {
    if (r >= shape_[0]) throw Error("tensor: row index out of range");
    out.insert(out.end(), data_.begin() + r * rs, data_.begin() + (r + 1) * rs);
  }
  return Tensor(s, std::move(out));
}

void Tensor::zero_grad() {
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

std::vector<double>& Tensor::ensure_grad() {
  if (!grad || grad->size() != data_.size()) grad.emplace(data_.size(), 0.0);
  return *grad;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("linf_distance: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace l2l
