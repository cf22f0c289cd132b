#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "l2l/graph.hpp"
#include "l2l/layers.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

enum class ArchKind { kMlp, kSmallCnn };
enum class Activation { kRelu, kTanh, kPrelu };
enum class NormKind { kNone, kBatch };

std::string to_string(ArchKind k);
std::string to_string(Activation a);
std::string to_string(NormKind n);
ArchKind parse_arch_kind(const std::string& s);
Activation parse_activation(const std::string& s);
NormKind parse_norm_kind(const std::string& s);

struct ArchSpec {
  ArchKind kind = ArchKind::kMlp;
  // mlp: hidden widths. small-cnn: the two conv channel counts.
  std::vector<std::size_t> widths{64, 64};
  Activation activation = Activation::kRelu;
  NormKind norm = NormKind::kNone;
  // [d] for mlp, [C, H, W] for small-cnn.
  Shape input_shape{2};
  std::size_t classes = 2;
  // 1-based layer index of the feature tap; penultimate when unset.
  std::optional<std::size_t> feature_tap;

  // Number of tappable layers; the last one produces the logits.
  std::size_t layer_count() const;
  std::size_t tap() const;
  void validate() const;

  static ArchSpec mlp(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes);
  static ArchSpec small_cnn(Shape input_shape, std::size_t classes);
};

bool operator==(const ArchSpec& a, const ArchSpec& b);

class ClassifierNet {
 public:
  struct Output {
    Var logits;
    // layers[s - 1] is the activation of layer s.
    std::vector<Var> layers;
  };

  const ArchSpec& spec() const { return spec_; }
  std::size_t classes() const { return spec_.classes; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // Full forward; may track parameter gradients and update running stats.
  Output forward(Graph& g, Var x, ForwardOptions opts);
  // Read-only forward with frozen parameters. Safe to call concurrently.
  Output forward(Graph& g, Var x, bool train = false) const;

 private:
  friend ClassifierNet build_classifier(const ArchSpec&, std::uint64_t);

  struct Block {
    std::optional<DenseLayer> dense;
    std::optional<Conv2dLayer> conv;
    std::optional<BatchNormLayer> norm;
    std::optional<PReLULayer> prelu;
    bool activate = true;
  };

  Output run(const ForwardContext& ctx, Var x) const;

  ArchSpec spec_;
  ParameterSet params_;
  std::vector<Block> blocks_;
};

ClassifierNet build_classifier(const ArchSpec& spec, std::uint64_t seed);

// Eval-mode logits [B, C].
Tensor classify(const ClassifierNet& net, const Tensor& x);
// argmax per row, lowest index on ties.
std::vector<std::size_t> predict(const Tensor& logits);
std::size_t argmax_row(std::span<const double> row);
// Eval-mode activation of layer s, flattened to [B, D].
Tensor feature(const ClassifierNet& net, const Tensor& x, std::size_t s);

}  // namespace l2l
