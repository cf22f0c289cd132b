#include "l2l/layers.hpp"

#include <algorithm>
#include <cmath>

#include "l2l/error.hpp"

namespace l2l {

std::size_t ParameterSet::add(Tensor t) {
  t.requires_grad = true;
  params_.push_back(std::move(t));
  return params_.size() - 1;
}

std::size_t ParameterSet::add_batch_norm(std::size_t channels) {
  stats_.push_back(BatchNormStats{Tensor({channels}, 0.0), Tensor({channels}, 1.0)});
  return stats_.size() - 1;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const Tensor& t : params_) n += t.size();
  return n;
}

std::size_t ParameterSet::buffer_count() const {
  std::size_t n = 0;
  for (const auto& s : stats_) n += s.running_mean.size() + s.running_var.size();
  return n;
}

std::vector<double> ParameterSet::flat() const {
  std::vector<double> out;
  out.reserve(count());
  for (const Tensor& t : params_) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

void ParameterSet::set_flat(std::span<const double> values) {
  if (values.size() != count()) {
    throw Error("parameters: expected " + std::to_string(count()) + " values, got " +
                std::to_string(values.size()));
  }
  std::size_t off = 0;
  for (Tensor& t : params_) {
    std::copy(values.begin() + off, values.begin() + off + t.size(), t.data().begin());
    off += t.size();
  }
}

std::vector<double> ParameterSet::flat_grad() const {
  std::vector<double> out;
  out.reserve(count());
  for (const Tensor& t : params_) {
    if (t.grad) {
      out.insert(out.end(), t.grad->begin(), t.grad->end());
    } else {
      out.insert(out.end(), t.size(), 0.0);
    }
  }
  return out;
}

std::vector<double> ParameterSet::flat_buffers() const {
  std::vector<double> out;
  out.reserve(buffer_count());
  for (const auto& s : stats_) {
    out.insert(out.end(), s.running_mean.data().begin(), s.running_mean.data().end());
    out.insert(out.end(), s.running_var.data().begin(), s.running_var.data().end());
  }
  return out;
}

void ParameterSet::set_flat_buffers(std::span<const double> values) {
  if (values.size() != buffer_count()) {
    throw Error("parameters: expected " + std::to_string(buffer_count()) +
                " buffer values, got " + std::to_string(values.size()));
  }
  std::size_t off = 0;
  for (auto& s : stats_) {
    for (Tensor* t : {&s.running_mean, &s.running_var}) {
      std::copy(values.begin() + off, values.begin() + off + t->size(), t->data().begin());
      off += t->size();
    }
  }
}

void ParameterSet::zero_grad() {
  for (Tensor& t : params_) t.zero_grad();
}

Var ForwardContext::bind(std::size_t index) const {
  if (options.track_params) {
    if (!mutable_params) throw Error("forward: gradient tracking needs mutable parameters");
    return graph.param(mutable_params->param(index));
  }
  return graph.frozen(params.param(index));
}

BatchNormStats* ForwardContext::stats(std::size_t index) const {
  if (options.train && options.update_stats) {
    if (!mutable_params) throw Error("forward: running-stat updates need mutable parameters");
    return &mutable_params->stats(index);
  }
  if (options.train) return nullptr;
  // Eval mode only reads the statistics.
  return const_cast<BatchNormStats*>(&params.stats(index));
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

DenseLayer DenseLayer::create(ParameterSet& ps, std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw Error("dense layer: widths must be positive");
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.weight = ps.add(glorot_uniform({in, out}, in, out, rng));
  l.bias = ps.add(Tensor({out}, 0.0));
  return l;
}

Var DenseLayer::operator()(const ForwardContext& ctx, Var x) const {
  return ctx.graph.dense(x, ctx.bind(weight), ctx.bind(bias));
}

Conv2dLayer Conv2dLayer::create(ParameterSet& ps, std::size_t in, std::size_t out,
                                std::size_t kernel, std::size_t stride, std::size_t pad,
                                Rng& rng) {
  if (in == 0 || out == 0 || kernel == 0 || stride == 0)
    throw Error("conv layer: sizes must be positive");
  Conv2dLayer l;
  l.in = in;
  l.out = out;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  const std::size_t kk = kernel * kernel;
  l.weight = ps.add(glorot_uniform({out, in, kernel, kernel}, in * kk, out * kk, rng));
  l.bias = ps.add(Tensor({out}, 0.0));
  return l;
}

Var Conv2dLayer::operator()(const ForwardContext& ctx, Var x) const {
  return ctx.graph.conv2d(x, ctx.bind(weight), ctx.bind(bias), stride, pad);
}

ConvTranspose2dLayer ConvTranspose2dLayer::create(ParameterSet& ps, std::size_t in,
                                                  std::size_t out, std::size_t kernel,
                                                  std::size_t stride, std::size_t pad,
                                                  Rng& rng) {
  if (in == 0 || out == 0 || kernel == 0 || stride == 0)
    throw Error("deconv layer: sizes must be positive");
  ConvTranspose2dLayer l;
  l.in = in;
  l.out = out;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  const std::size_t kk = kernel * kernel;
  l.weight = ps.add(glorot_uniform({in, out, kernel, kernel}, in * kk, out * kk, rng));
  l.bias = ps.add(Tensor({out}, 0.0));
  return l;
}

Var ConvTranspose2dLayer::operator()(const ForwardContext& ctx, Var x) const {
  return ctx.graph.conv_transpose2d(x, ctx.bind(weight), ctx.bind(bias), stride, pad);
}

BatchNormLayer BatchNormLayer::create(ParameterSet& ps, std::size_t channels) {
  BatchNormLayer l;
  l.gamma = ps.add(Tensor({channels}, 1.0));
  l.beta = ps.add(Tensor({channels}, 0.0));
  l.stats = ps.add_batch_norm(channels);
  return l;
}

Var BatchNormLayer::operator()(const ForwardContext& ctx, Var x) const {
  return ctx.graph.batch_norm(x, ctx.bind(gamma), ctx.bind(beta), ctx.stats(stats),
                              ctx.options.train);
}

PReLULayer PReLULayer::create(ParameterSet& ps, std::size_t channels, double init) {
  PReLULayer l;
  l.slope = ps.add(Tensor({channels}, init));
  return l;
}

Var PReLULayer::operator()(const ForwardContext& ctx, Var x) const {
  return ctx.graph.prelu(x, ctx.bind(slope));
}

}  // namespace l2l
