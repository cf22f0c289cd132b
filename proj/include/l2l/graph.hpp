#pragma once

// Define-by-run reverse-mode differentiation. Each op computes its forward
// value immediately and records a reverse rule; backward() replays the rules
// in reverse insertion order, which is a topological order by construction.

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "l2l/tensor.hpp"

namespace l2l {

struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Per-channel running statistics owned by a network.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Var constant(Tensor t);
  // Differentiable leaf owned by the graph; read its gradient with grad().
  Var input(Tensor t);
  // External tensor. When t.requires_grad, backward() accumulates into t.grad.
  Var param(Tensor& t);
  // External tensor treated as a constant.
  Var frozen(const Tensor& t);

  const Tensor& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  // Gradient of the last backward() loss with respect to `v` (zeros if `v`
  // did not influence the loss).
  std::vector<double> grad(Var v) const;
  bool requires_grad(Var v) const;

  // `loss` must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  // Number of zero-norm cosine similarities encountered (defined as 0).
  std::size_t zero_norm_warnings() const { return zero_norm_warnings_; }

  // Ops. Shapes: dense x[B,in] w[in,out] b[out]; conv2d x[B,Ci,H,W]
  // w[Co,Ci,k,k] b[Co]; conv_transpose2d x[B,Ci,H,W] w[Ci,Co,k,k] b[Co].
  Var dense(Var x, Var w, Var b);
  Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad);
  Var conv_transpose2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad);
  // Train mode normalizes with batch statistics and, when `stats` is non-null,
  // folds them into the running estimates. Eval mode uses `stats` verbatim.
  Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats* stats, bool train);
  Var relu(Var x);
  // slope has one element (shared) or one per channel (axis 1).
  Var prelu(Var x, Var slope);
  Var tanh(Var x);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var concat_channels(const std::vector<Var>& parts);
  // sign(0) = 0; the reverse rule is identically zero.
  Var sign(Var x);
  // Reverse rule passes gradient where lo <= x <= hi and blocks it outside.
  Var clamp(Var x, double lo, double hi);
  Var reshape(Var x, Shape shape);
  // Per-row cross-entropy against probability targets: logits[B,C] -> [B].
  Var softmax_cross_entropy(Var logits, Var targets);
  // Per-row min(max_{j != y} z_j - z_y, kappa) with y = argmax(targets row).
  Var margin_loss(Var logits, Var targets, double kappa);
  // Per-row cosine similarity of flattened rows: [B,...] x [B,...] -> [B].
  Var cosine_similarity(Var a, Var b);
  Var mean(Var x);
  Var sum(Var x);

 private:
  struct Node {
    const char* op = "";
    std::vector<std::size_t> inputs;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor* sink = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
    std::function<void(Graph&, std::size_t)> reverse;
  };

  const Node& node(Var v) const;
  const Tensor& val(std::size_t id) const;
  // Gradient accumulator for node `id`, or nullptr if it needs none.
  double* acc(std::size_t id);
  const std::vector<double>& out_grad(std::size_t id) const { return nodes_[id].grad; }
  Var push(const char* op, std::vector<std::size_t> inputs, Tensor value,
           std::function<void(Graph&, std::size_t)> reverse);
  [[noreturn]] void fail(const char* op, const std::string& msg) const;

  std::vector<Node> nodes_;
  std::size_t zero_norm_warnings_ = 0;
};

}  // namespace l2l
