#include "l2l/learned_attack.hpp"

#include <cmath>

#include "l2l/error.hpp"
#include "l2l/rng.hpp"

namespace l2l {
namespace {

std::size_t scaled(std::size_t base, double width) {
  const auto c = static_cast<long>(std::lround(static_cast<double>(base) * width));
  return static_cast<std::size_t>(std::max(1L, c));
}

bool is_image(const Shape& s) { return s.size() == 3; }

}  // namespace

std::string to_string(AttackerVariant v) {
  switch (v) {
    case AttackerVariant::kNaive: return "naive";
    case AttackerVariant::kGrad: return "grad";
    case AttackerVariant::kTwoStep: return "two_step";
    case AttackerVariant::kSlim: return "slim";
  }
  return "grad";
}

AttackerVariant parse_attacker_variant(const std::string& s) {
  if (s == "naive") return AttackerVariant::kNaive;
  if (s == "grad") return AttackerVariant::kGrad;
  if (s == "two_step") return AttackerVariant::kTwoStep;
  if (s == "slim") return AttackerVariant::kSlim;
  throw Error("unknown attacker variant '" + s + "' (expected naive | grad | two_step | slim)");
}

Var AttackerNet::Linear::operator()(const ForwardContext& ctx, Var x) const {
  return dense ? (*dense)(ctx, x) : (*conv)(ctx, x);
}

Shape AttackerNet::input_shape() const {
  Shape s = sample_shape_;
  if (variant_ != AttackerVariant::kNaive) s[0] *= 2;
  return s;
}

std::vector<std::size_t> AttackerNet::channel_sequence() const {
  auto out_of = [](const Linear& l) { return l.dense ? l.dense->out : l.conv->out; };
  std::vector<std::size_t> seq{out_of(stem_)};
  for (const ResBlock& b : blocks_) seq.push_back(out_of(b.lin2));
  if (up_) seq.push_back(up_->out);
  if (up_dense_) seq.push_back(up_dense_->out);
  seq.push_back(out_of(head_));
  return seq;
}

AttackerNet build_attacker(AttackerVariant variant, double epsilon, const Shape& sample_shape,
                           double width, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw Error("attacker: epsilon must be > 0");
  if (!(width > 0.0)) throw Error("attacker: width must be > 0");
  if (sample_shape.size() != 1 && sample_shape.size() != 3)
    throw Error("attacker: sample shape must be [d] or [C, H, W], got " + shape_str(sample_shape));
  const bool image = is_image(sample_shape);
  const bool slim = variant == AttackerVariant::kSlim;
  if (slim && image && (sample_shape[1] % 2 != 0 || sample_shape[2] % 2 != 0))
    throw Error("attacker: slim variant needs even image height and width");

  AttackerNet a;
  a.variant_ = variant;
  a.epsilon_ = epsilon;
  a.width_ = width;
  a.sample_shape_ = sample_shape;
  ParameterSet& ps = a.params_;
  Rng rng(derive_seed(seed, stream::kAttackerInit));

  auto linear = [&](std::size_t in, std::size_t out, std::size_t k, std::size_t stride) {
    AttackerNet::Linear l;
    if (image) {
      l.conv = Conv2dLayer::create(ps, in, out, k, stride, k / 2, rng);
    } else {
      l.dense = DenseLayer::create(ps, in, out, rng);
    }
    return l;
  };
  auto resblock = [&](std::size_t in, std::size_t out, std::size_t stride) {
    AttackerNet::ResBlock b;
    b.bn1 = BatchNormLayer::create(ps, in);
    if (slim) b.act1 = PReLULayer::create(ps, in);
    b.lin1 = linear(in, out, 3, stride);
    b.bn2 = BatchNormLayer::create(ps, out);
    if (slim) b.act2 = PReLULayer::create(ps, out);
    b.lin2 = linear(out, out, 3, 1);
    if (in != out || stride != 1) b.skip = linear(in, out, 1, stride);
    return b;
  };

  const std::size_t in_ch = a.input_shape()[0];
  const std::size_t out_ch = sample_shape[0];
  if (!slim) {
    const std::size_t c0 = scaled(64, width), c1 = scaled(128, width), c2 = scaled(256, width);
    a.stem_ = linear(in_ch, c0, 3, 1);
    a.stem_bn_ = BatchNormLayer::create(ps, c0);
    a.blocks_.push_back(resblock(c0, c1, 1));
    a.blocks_.push_back(resblock(c1, c2, 1));
    a.blocks_.push_back(resblock(c2, c1, 1));
    a.head_ = linear(c1, out_ch, 3, 1);
  } else {
    const std::size_t c0 = scaled(128, width), c1 = scaled(256, width), cu = scaled(16, width);
    a.stem_ = linear(in_ch, c0, 3, 1);
    a.stem_bn_ = BatchNormLayer::create(ps, c0);
    a.blocks_.push_back(resblock(c0, c1, image ? 2 : 1));
    a.blocks_.push_back(resblock(c1, c0, 1));
    a.post_bn_ = BatchNormLayer::create(ps, c0);
    if (image) {
      a.up_ = ConvTranspose2dLayer::create(ps, c0, cu, 4, 2, 1, rng);
    } else {
      a.up_dense_ = DenseLayer::create(ps, c0, cu, rng);
    }
    a.up_bn_ = BatchNormLayer::create(ps, cu);
    a.head_ = linear(cu + in_ch, out_ch, 3, 1);
  }
  return a;
}

Var AttackerNet::run(const ForwardContext& ctx, Var a) const {
  Graph& g = ctx.graph;
  const Shape expect = input_shape();
  const Shape& got = g.shape(a);
  if (got.size() != expect.size() + 1 || !std::equal(expect.begin(), expect.end(), got.begin() + 1))
    throw Error("attacker: input shape " + shape_str(got) + " does not match [B, " +
                shape_str(expect).substr(1));

  auto act = [&](const std::optional<PReLULayer>& p, Var v) { return p ? (*p)(ctx, v) : g.relu(v); };

  Var h = g.relu(stem_bn_(ctx, stem_(ctx, a)));
  for (const ResBlock& b : blocks_) {
    Var r = b.lin1(ctx, act(b.act1, b.bn1(ctx, h)));
    r = b.lin2(ctx, act(b.act2, b.bn2(ctx, r)));
    h = g.add(r, b.skip ? (*b.skip)(ctx, h) : h);
  }
  if (post_bn_) {
    h = (*post_bn_)(ctx, h);
    h = up_ ? (*up_)(ctx, h) : (*up_dense_)(ctx, h);
    h = g.relu((*up_bn_)(ctx, h));
    h = g.concat_channels({a, h});
  }
  return head_(ctx, h);
}

Var AttackerNet::perturb(Graph& g, Var a, ForwardOptions opts) {
  Var pre = run(ForwardContext{g, params_, &params_, opts}, a);
  return g.scale(g.tanh(pre), epsilon_);
}

Var AttackerNet::perturb(Graph& g, Var a, bool train) const {
  Var pre = run(ForwardContext{g, params_, nullptr, ForwardOptions{train, false, false}}, a);
  return g.scale(g.tanh(pre), epsilon_);
}

Tensor AttackerNet::backbone(const Tensor& a) const {
  Graph g;
  return g.value(run(ForwardContext{g, params_, nullptr, ForwardOptions{}}, g.constant(a)));
}

void AttackerNet::zero_output_layer() {
  const std::size_t w = head_.dense ? head_.dense->weight : head_.conv->weight;
  const std::size_t b = head_.dense ? head_.dense->bias : head_.conv->bias;
  for (std::size_t i : {w, b}) {
    for (double& v : params_.param(i).data()) v = 0.0;
  }
}

Tensor gradient_field(const GradientSource& src, const Tensor& x) {
  if (!src.net) throw Error("attacker input: classifier missing");
  const ClassifierNet& net = *src.net;
  if (src.mode == AttackerMode::kDro) {
    if (!src.targets) throw Error("attacker input: labels missing in DRO mode");
    return objective_gradient(cross_entropy_objective(net, src.classifier_train), x, *src.targets);
  }
  if (!src.partner) throw Error("attacker input: partner inputs required in AIT mode");
  if (src.partner->shape() != x.shape())
    throw Error("attacker input: partner batch " + shape_str(src.partner->shape()) +
                " differs from " + shape_str(x.shape()));
  Tensor partner_feat;
  {
    Graph g;
    Var f = net.forward(g, g.constant(*src.partner), src.classifier_train).layers.at(src.tap - 1);
    partner_feat = g.value(f);
  }
  Graph g;
  Var xi = g.input(x);
  Var f = net.forward(g, xi, src.classifier_train).layers.at(src.tap - 1);
  g.backward(g.sum(g.cosine_similarity(f, g.constant(partner_feat))));
  return Tensor(x.shape(), g.grad(xi));
}

Tensor assemble_input(AttackerVariant variant, const Tensor& x, const Tensor& gradient) {
  if (variant == AttackerVariant::kNaive) return x;
  if (gradient.shape() != x.shape())
    throw Error("attacker input: gradient shape " + shape_str(gradient.shape()) +
                " differs from " + shape_str(x.shape()));
  Graph g;
  return g.value(g.concat_channels({g.constant(x), g.constant(gradient)}));
}

Tensor attacker_input(AttackerVariant variant, const GradientSource& src, const Tensor& x) {
  if (variant == AttackerVariant::kNaive) {
    if (src.mode == AttackerMode::kAit && !src.partner)
      throw Error("attacker input: partner inputs required in AIT mode");
    return x;
  }
  return assemble_input(variant, x, gradient_field(src, x));
}

Tensor generate_perturbation(const AttackerNet& attacker, const Tensor& a) {
  Graph g;
  return g.value(attacker.perturb(g, g.constant(a)));
}

Var perturbation_graph(Graph& g, AttackerVariant variant, double epsilon,
                       const AttackerApply& apply, const GradientSource& src, const Tensor& x,
                       const std::optional<Domain>& domain) {
  if (variant == AttackerVariant::kNaive) return apply(g, g.constant(x));
  Var xc = g.constant(x);
  Var d0 = apply(g, g.concat_channels({xc, g.constant(gradient_field(src, x))}));
  if (variant != AttackerVariant::kTwoStep) return d0;

  Var x0 = clamp_to_domain(g, g.add(xc, d0), domain);
  // Gradient channels are detached; x0 still carries the first cell's output.
  Var u1 = g.constant(gradient_field(src, g.value(x0)));
  Var d1 = apply(g, g.concat_channels({x0, u1}));
  return g.clamp(g.add(d0, d1), -epsilon, epsilon);
}

Tensor two_step_perturbation(const AttackerNet& attacker, const ClassifierNet& net,
                             const Tensor& x, const Tensor& y,
                             const std::optional<Domain>& domain) {
  if (attacker.variant() != AttackerVariant::kTwoStep)
    throw Error("two_step_perturbation: attacker variant is " + to_string(attacker.variant()));
  return learned_perturbation(attacker, net, x, y, domain);
}

Tensor learned_perturbation(const AttackerNet& attacker, const ClassifierNet& net,
                            const Tensor& x, const Tensor& y,
                            const std::optional<Domain>& domain) {
  GradientSource src;
  src.net = &net;
  src.targets = &y;
  Graph g;
  AttackerApply apply = [&attacker](Graph& gg, Var a) { return attacker.perturb(gg, a); };
  return g.value(
      perturbation_graph(g, attacker.variant(), attacker.epsilon(), apply, src, x, domain));
}

Tensor learned_attack(const AttackerNet& attacker, const ClassifierNet& net, const Tensor& x,
                      const Tensor& y, const std::optional<Domain>& domain) {
  const Tensor d = learned_perturbation(attacker, net, x, y, domain);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  return clamp_to_domain(std::move(out), domain);
}

}  // namespace l2l
