#include "l2l/nets.hpp"

#include "l2l/error.hpp"
#include "l2l/rng.hpp"

namespace l2l {

std::string to_string(ArchKind k) { return k == ArchKind::kMlp ? "mlp" : "small-cnn"; }

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kPrelu: return "prelu";
  }
  return "relu";
}

std::string to_string(NormKind n) { return n == NormKind::kBatch ? "batch" : "none"; }

ArchKind parse_arch_kind(const std::string& s) {
  if (s == "mlp") return ArchKind::kMlp;
  if (s == "small-cnn") return ArchKind::kSmallCnn;
  throw Error("unknown architecture kind '" + s + "' (expected mlp | small-cnn)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "prelu") return Activation::kPrelu;
  throw Error("unknown activation '" + s + "' (expected relu | tanh | prelu)");
}

NormKind parse_norm_kind(const std::string& s) {
  if (s == "none") return NormKind::kNone;
  if (s == "batch") return NormKind::kBatch;
  throw Error("unknown norm kind '" + s + "' (expected batch | none)");
}

std::size_t ArchSpec::layer_count() const { return widths.size() + 1; }

// Penultimate layer; a linear model only has its logits.
std::size_t ArchSpec::tap() const {
  return feature_tap.value_or(std::max<std::size_t>(1, layer_count() - 1));
}

void ArchSpec::validate() const {
  if (classes < 2) throw Error("arch: classes must be at least 2");
  for (std::size_t w : widths) {
    if (w == 0) throw Error("arch: layer widths must be positive");
  }
  if (kind == ArchKind::kMlp) {
    if (input_shape.size() != 1 || input_shape[0] == 0)
      throw Error("arch: mlp input shape must be [d] with d > 0, got " + shape_str(input_shape));
  } else {
    if (input_shape.size() != 3 || shape_numel(input_shape) == 0)
      throw Error("arch: small-cnn input shape must be [C, H, W], got " +
                  shape_str(input_shape));
    if (widths.size() != 2) throw Error("arch: small-cnn takes exactly two channel counts");
  }
  const std::size_t s = tap();
  if (s < 1 || s > layer_count()) {
    throw Error("arch: feature tap " + std::to_string(s) + " outside layers 1.." +
                std::to_string(layer_count()));
  }
}

ArchSpec ArchSpec::mlp(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes) {
  ArchSpec s;
  s.kind = ArchKind::kMlp;
  s.widths = std::move(hidden);
  s.input_shape = {in};
  s.classes = classes;
  return s;
}

ArchSpec ArchSpec::small_cnn(Shape input_shape, std::size_t classes) {
  ArchSpec s;
  s.kind = ArchKind::kSmallCnn;
  s.widths = {16, 32};
  s.input_shape = std::move(input_shape);
  s.classes = classes;
  return s;
}

bool operator==(const ArchSpec& a, const ArchSpec& b) {
  return a.kind == b.kind && a.widths == b.widths && a.activation == b.activation &&
         a.norm == b.norm && a.input_shape == b.input_shape && a.classes == b.classes &&
         a.tap() == b.tap();
}

ClassifierNet build_classifier(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  ClassifierNet net;
  net.spec_ = spec;
  Rng rng(derive_seed(seed, stream::kInit));
  ParameterSet& ps = net.params_;

  auto finish_block = [&](ClassifierNet::Block& b, std::size_t channels) {
    if (spec.norm == NormKind::kBatch) b.norm = BatchNormLayer::create(ps, channels);
    if (spec.activation == Activation::kPrelu) b.prelu = PReLULayer::create(ps, channels);
  };

  if (spec.kind == ArchKind::kMlp) {
    std::size_t in = spec.input_shape[0];
    for (std::size_t w : spec.widths) {
      ClassifierNet::Block b;
      b.dense = DenseLayer::create(ps, in, w, rng);
      finish_block(b, w);
      net.blocks_.push_back(std::move(b));
      in = w;
    }
    ClassifierNet::Block head;
    head.dense = DenseLayer::create(ps, in, spec.classes, rng);
    head.activate = false;
    net.blocks_.push_back(std::move(head));
  } else {
    const std::size_t c = spec.input_shape[0];
    std::size_t h = spec.input_shape[1], w = spec.input_shape[2];
    ClassifierNet::Block b1;
    b1.conv = Conv2dLayer::create(ps, c, spec.widths[0], 3, 1, 1, rng);
    finish_block(b1, spec.widths[0]);
    net.blocks_.push_back(std::move(b1));
    ClassifierNet::Block b2;
    b2.conv = Conv2dLayer::create(ps, spec.widths[0], spec.widths[1], 3, 2, 1, rng);
    finish_block(b2, spec.widths[1]);
    net.blocks_.push_back(std::move(b2));
    h = (h + 2 - 3) / 2 + 1;
    w = (w + 2 - 3) / 2 + 1;
    ClassifierNet::Block head;
    head.dense = DenseLayer::create(ps, spec.widths[1] * h * w, spec.classes, rng);
    head.activate = false;
    net.blocks_.push_back(std::move(head));
  }
  return net;
}

ClassifierNet::Output ClassifierNet::run(const ForwardContext& ctx, Var x) const {
  Graph& g = ctx.graph;
  Shape expect = spec_.input_shape;
  const Shape& got = g.shape(x);
  if (got.size() != expect.size() + 1 ||
      !std::equal(expect.begin(), expect.end(), got.begin() + 1)) {
    throw Error("classify: input shape " + shape_str(got) + " does not match [B, " +
                shape_str(expect).substr(1));
  }
  Output out;
  Var h = x;
  for (const Block& b : blocks_) {
    if (b.dense) {
      if (g.shape(h).size() != 2) {
        const std::size_t batch = g.shape(h)[0];
        h = g.reshape(h, {batch, g.value(h).size() / batch});
      }
      h = (*b.dense)(ctx, h);
    } else {
      h = (*b.conv)(ctx, h);
    }
    if (b.activate) {
      if (b.norm) h = (*b.norm)(ctx, h);
      switch (spec_.activation) {
        case Activation::kRelu: h = g.relu(h); break;
        case Activation::kTanh: h = g.tanh(h); break;
        case Activation::kPrelu: h = (*b.prelu)(ctx, h); break;
      }
    }
    out.layers.push_back(h);
  }
  out.logits = h;
  return out;
}

ClassifierNet::Output ClassifierNet::forward(Graph& g, Var x, ForwardOptions opts) {
  return run(ForwardContext{g, params_, &params_, opts}, x);
}

ClassifierNet::Output ClassifierNet::forward(Graph& g, Var x, bool train) const {
  return run(ForwardContext{g, params_, nullptr, ForwardOptions{train, false, false}}, x);
}

Tensor classify(const ClassifierNet& net, const Tensor& x) {
  Graph g;
  return g.value(net.forward(g, g.constant(x)).logits);
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<std::size_t> predict(const Tensor& logits) {
  if (logits.rank() != 2) throw Error("predict: logits must be [B, C]");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<std::size_t> out(b);
  for (std::size_t i = 0; i < b; ++i) out[i] = argmax_row(logits.data().subspan(i * c, c));
  return out;
}

Tensor feature(const ClassifierNet& net, const Tensor& x, std::size_t s) {
  if (s < 1 || s > net.spec().layer_count()) {
    throw Error("feature: layer " + std::to_string(s) + " outside 1.." +
                std::to_string(net.spec().layer_count()));
  }
  Graph g;
  const Tensor& f = g.value(net.forward(g, g.constant(x)).layers[s - 1]);
  const std::size_t b = f.dim(0);
  return f.reshaped({b, f.size() / b});
}

}  // namespace l2l
