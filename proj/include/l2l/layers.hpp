#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "l2l/graph.hpp"
#include "l2l/rng.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

// Learnable tensors plus batch-norm running statistics of one network.
// Layers refer to entries by index, so networks copy by value safely.
class ParameterSet {
 public:
  std::size_t add(Tensor t);
  std::size_t add_batch_norm(std::size_t channels);

  Tensor& param(std::size_t i) { return params_.at(i); }
  const Tensor& param(std::size_t i) const { return params_.at(i); }
  BatchNormStats& stats(std::size_t i) { return stats_.at(i); }
  const BatchNormStats& stats(std::size_t i) const { return stats_.at(i); }

  std::size_t tensor_count() const { return params_.size(); }
  // Total number of learnable scalars.
  std::size_t count() const;
  std::size_t buffer_count() const;

  std::vector<double> flat() const;
  void set_flat(std::span<const double> values);
  std::vector<double> flat_grad() const;
  std::vector<double> flat_buffers() const;
  void set_flat_buffers(std::span<const double> values);
  void zero_grad();

  std::vector<Tensor>& tensors() { return params_; }
  const std::vector<Tensor>& tensors() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<BatchNormStats> stats_;
};

struct ForwardOptions {
  // Batch norm uses batch statistics when true.
  bool train = false;
  // Parameter gradients accumulate into ParameterSet tensors when true.
  bool track_params = false;
  // Train-mode batch norm folds batch statistics into running estimates.
  bool update_stats = false;
};

// Binding context for one forward pass. `mutable_params` is null for
// read-only passes, which may then run concurrently on a shared network.
struct ForwardContext {
  Graph& graph;
  const ParameterSet& params;
  ParameterSet* mutable_params;
  ForwardOptions options;

  Var bind(std::size_t index) const;
  BatchNormStats* stats(std::size_t index) const;
};

// uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct DenseLayer {
  std::size_t weight = 0, bias = 0, in = 0, out = 0;
  static DenseLayer create(ParameterSet& ps, std::size_t in, std::size_t out, Rng& rng);
  Var operator()(const ForwardContext& ctx, Var x) const;
};

struct Conv2dLayer {
  std::size_t weight = 0, bias = 0, in = 0, out = 0, kernel = 3, stride = 1, pad = 1;
  static Conv2dLayer create(ParameterSet& ps, std::size_t in, std::size_t out, std::size_t kernel,
                            std::size_t stride, std::size_t pad, Rng& rng);
  Var operator()(const ForwardContext& ctx, Var x) const;
};

struct ConvTranspose2dLayer {
  std::size_t weight = 0, bias = 0, in = 0, out = 0, kernel = 4, stride = 2, pad = 1;
  static ConvTranspose2dLayer create(ParameterSet& ps, std::size_t in, std::size_t out,
                                     std::size_t kernel, std::size_t stride, std::size_t pad,
                                     Rng& rng);
  Var operator()(const ForwardContext& ctx, Var x) const;
};

struct BatchNormLayer {
  std::size_t gamma = 0, beta = 0, stats = 0;
  static BatchNormLayer create(ParameterSet& ps, std::size_t channels);
  Var operator()(const ForwardContext& ctx, Var x) const;
};

struct PReLULayer {
  std::size_t slope = 0;
  static PReLULayer create(ParameterSet& ps, std::size_t channels, double init = 0.25);
  Var operator()(const ForwardContext& ctx, Var x) const;
};

}  // namespace l2l
