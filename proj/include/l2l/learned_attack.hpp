#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2l/attacks.hpp"
#include "l2l/layers.hpp"
#include "l2l/nets.hpp"

namespace l2l {

enum class AttackerVariant { kNaive, kGrad, kTwoStep, kSlim };
std::string to_string(AttackerVariant v);
AttackerVariant parse_attacker_variant(const std::string& s);

// Which follower objective feeds the gradient channels.
enum class AttackerMode { kDro, kAit };

class AttackerNet {
 public:
  AttackerVariant variant() const { return variant_; }
  double epsilon() const { return epsilon_; }
  double width() const { return width_; }
  // Shape of one clean sample, [d] or [C, H, W].
  const Shape& sample_shape() const { return sample_shape_; }
  // Shape of one attacker input sample.
  Shape input_shape() const;
  // Channel sequence of the backbone, stem to head.
  std::vector<std::size_t> channel_sequence() const;

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // delta = eps * tanh(backbone(A)).
  Var perturb(Graph& g, Var a, ForwardOptions opts);
  // Frozen phi; batch norm on batch statistics when `train`.
  Var perturb(Graph& g, Var a, bool train = false) const;
  // Pre-activation output of the backbone (eval mode).
  Tensor backbone(const Tensor& a) const;

  // Zeroes the head so the backbone output is identically 0.
  void zero_output_layer();

 private:
  friend AttackerNet build_attacker(AttackerVariant, double, const Shape&, double, std::uint64_t);

  // Dense for vector samples, convolution for images.
  struct Linear {
    std::optional<DenseLayer> dense;
    std::optional<Conv2dLayer> conv;
    Var operator()(const ForwardContext& ctx, Var x) const;
  };
  struct ResBlock {
    BatchNormLayer bn1, bn2;
    Linear lin1, lin2;
    std::optional<Linear> skip;
    std::optional<PReLULayer> act1, act2;
  };

  Var run(const ForwardContext& ctx, Var a) const;

  AttackerVariant variant_ = AttackerVariant::kGrad;
  double epsilon_ = 0.0;
  double width_ = 0.25;
  Shape sample_shape_;
  ParameterSet params_;
  Linear stem_;
  BatchNormLayer stem_bn_;
  std::vector<ResBlock> blocks_;
  // Slim only.
  std::optional<BatchNormLayer> post_bn_;
  std::optional<ConvTranspose2dLayer> up_;
  std::optional<DenseLayer> up_dense_;
  std::optional<BatchNormLayer> up_bn_;
  Linear head_;
};

// Channels of every stage are round(base * width), at least 1.
AttackerNet build_attacker(AttackerVariant variant, double epsilon, const Shape& sample_shape,
                           double width, std::uint64_t seed);

// Where the gradient channels come from.
struct GradientSource {
  AttackerMode mode = AttackerMode::kDro;
  const ClassifierNet* net = nullptr;
  // One-hot labels (DRO).
  const Tensor* targets = nullptr;
  // Partner inputs x_j (AIT).
  const Tensor* partner = nullptr;
  // Feature tap for AIT.
  std::size_t tap = 1;
  // Classifier batch norm uses batch statistics (without updating them).
  bool classifier_train = false;
};

// Detached gradient field at x: grad of sum_i l_i (DRO) or sum_i q(x_i, x_j) (AIT).
Tensor gradient_field(const GradientSource& src, const Tensor& x);

// A = x (naive) or concat(x, g) along channels.
Tensor assemble_input(AttackerVariant variant, const Tensor& x, const Tensor& gradient);
Tensor attacker_input(AttackerVariant variant, const GradientSource& src, const Tensor& x);

Tensor generate_perturbation(const AttackerNet& attacker, const Tensor& a);

// Applies the attacker to a batch inside `g`. Two-step runs the shared cell
// twice; the intermediate point is clamped to `domain`.
using AttackerApply = std::function<Var(Graph&, Var)>;
Var perturbation_graph(Graph& g, AttackerVariant variant, double epsilon,
                       const AttackerApply& apply, const GradientSource& src, const Tensor& x,
                       const std::optional<Domain>& domain);

Tensor two_step_perturbation(const AttackerNet& attacker, const ClassifierNet& net,
                             const Tensor& x, const Tensor& y,
                             const std::optional<Domain>& domain);

// Full eval-mode perturbation for any variant, DRO gradient channels.
Tensor learned_perturbation(const AttackerNet& attacker, const ClassifierNet& net,
                            const Tensor& x, const Tensor& y,
                            const std::optional<Domain>& domain);
// clamp_domain(x + delta).
Tensor learned_attack(const AttackerNet& attacker, const ClassifierNet& net, const Tensor& x,
                      const Tensor& y, const std::optional<Domain>& domain);

}  // namespace l2l
