#include "l2l/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "l2l/error.hpp"
#include "l2l/kernels.hpp"
#include "l2l/rng.hpp"

namespace l2l {
namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_batch(const Tensor& x, const Tensor& y, const char* who) {
  if (x.rank() < 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw Error(std::string(who) + ": inputs " + shape_str(x.shape()) + " and targets " +
                shape_str(y.shape()) + " disagree on batch size");
  }
}

Tensor add_clamped(const Tensor& x, const Tensor& delta, const std::optional<Domain>& domain) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + delta[i];
  return clamp_to_domain(std::move(out), domain);
}

constexpr std::size_t kRandomChunk = 512;

}  // namespace

Tensor clamp_to_domain(Tensor x, const std::optional<Domain>& domain) {
  if (domain) kernels::clamp(x.data(), domain->lo, domain->hi);
  return x;
}

Var clamp_to_domain(Graph& g, Var x, const std::optional<Domain>& domain) {
  return domain ? g.clamp(x, domain->lo, domain->hi) : x;
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kPgm: return "pgm";
    case AttackKind::kCw: return "cw";
    case AttackKind::kRandom: return "random";
  }
  return "pgm";
}

AttackKind parse_attack_kind(const std::string& s) {
  if (s == "fgsm") return AttackKind::kFgsm;
  if (s == "pgm") return AttackKind::kPgm;
  if (s == "cw") return AttackKind::kCw;
  if (s == "random") return AttackKind::kRandom;
  throw Error("unknown attack kind '" + s + "' (expected fgsm | pgm | cw | random)");
}

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0)) throw Error("attack: epsilon must be >= 0");
  const bool iterative = kind == AttackKind::kPgm || kind == AttackKind::kCw;
  if (iterative) {
    if (steps < 1) throw Error("attack: steps must be >= 1");
    if (epsilon > 0.0 && !(eta > 0.0)) throw Error("attack: eta must be > 0");
    if (!(init_radius >= 0.0) || init_radius > epsilon)
      throw Error("attack: init_radius must lie in [0, epsilon]");
  }
  if (kind == AttackKind::kRandom && samples < 1) throw Error("attack: samples must be >= 1");
  if (domain && !(domain->lo <= domain->hi)) throw Error("attack: domain needs lo <= hi");
}

Objective cross_entropy_objective(const ClassifierNet& net, bool train_mode) {
  return [&net, train_mode](Graph& g, Var x, const Tensor& targets) {
    Var logits = net.forward(g, x, train_mode).logits;
    return g.softmax_cross_entropy(logits, g.constant(targets));
  };
}

Objective margin_objective(const ClassifierNet& net, double kappa, bool train_mode) {
  return [&net, kappa, train_mode](Graph& g, Var x, const Tensor& targets) {
    Var logits = net.forward(g, x, train_mode).logits;
    return g.margin_loss(logits, g.constant(targets), kappa);
  };
}

Tensor objective_gradient(const Objective& obj, const Tensor& x, const Tensor& targets,
                          std::vector<double>* values) {
  Graph g;
  Var xi = g.input(x);
  Var per_row = obj(g, xi, targets);
  if (values) *values = g.value(per_row).vec();
  g.backward(g.sum(per_row));
  return Tensor(x.shape(), g.grad(xi));
}

std::vector<double> objective_values(const Objective& obj, const Tensor& x,
                                     const Tensor& targets) {
  Graph g;
  return g.value(obj(g, g.constant(x), targets)).vec();
}

Tensor project_linf(const Tensor& delta, double eps) {
  if (!(eps >= 0.0)) throw Error("project_linf: epsilon must be >= 0");
  Tensor out = delta;
  out.requires_grad = false;
  out.grad.reset();
  kernels::clamp(out.data(), -eps, eps);
  return out;
}

Tensor fgsm(const Objective& obj, const Tensor& x, const Tensor& y, double eps,
            const std::optional<Domain>& domain) {
  if (!(eps >= 0.0)) throw Error("fgsm: epsilon must be >= 0");
  check_batch(x, y, "fgsm");
  const Tensor g = objective_gradient(obj, x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + eps * sign_of(g[i]);
  return clamp_to_domain(std::move(out), domain);
}

Tensor fgsm(const ClassifierNet& net, const Tensor& x, const Tensor& y, double eps,
            const std::optional<Domain>& domain) {
  return fgsm(cross_entropy_objective(net), x, y, eps, domain);
}

Tensor projected_sign_ascent(const Objective& obj, const Tensor& x, const Tensor& y,
                             const AttackSpec& spec, std::uint64_t seed,
                             std::uint64_t index_offset, const IterateObserver& observer) {
  spec.validate();
  check_batch(x, y, "pgm");
  const double eps = spec.epsilon;
  const std::size_t rows = x.dim(0), row = x.row_size();

  Tensor delta(x.shape(), 0.0);
  if (spec.init_radius > 0.0) {
    for (std::size_t i = 0; i < rows; ++i) {
      Rng rng(derive_seed(seed, stream::kAttack, index_offset + i));
      for (std::size_t k = 0; k < row; ++k)
        delta[i * row + k] = rng.uniform(-spec.init_radius, spec.init_radius);
    }
  }

  for (std::size_t t = 1; t <= spec.steps; ++t) {
    // The first iterate of a zero start is evaluated at x itself.
    const bool at_x = t == 1 && spec.init_radius == 0.0;
    const Tensor grad = objective_gradient(obj, at_x ? x : add_clamped(x, delta, spec.domain), y);
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += spec.eta * sign_of(grad[i]);
    kernels::clamp(delta.data(), -eps, eps);
    if (observer) observer(t, delta);
  }
  return add_clamped(x, delta, spec.domain);
}

Tensor pgm(const Objective& obj, const Tensor& x, const Tensor& y, const AttackSpec& spec,
           std::uint64_t seed, std::uint64_t index_offset, const IterateObserver& observer) {
  return projected_sign_ascent(obj, x, y, spec, seed, index_offset, observer);
}

Tensor pgm(const ClassifierNet& net, const Tensor& x, const Tensor& y, const AttackSpec& spec,
           std::uint64_t seed, std::uint64_t index_offset) {
  return projected_sign_ascent(cross_entropy_objective(net), x, y, spec, seed, index_offset);
}

Tensor cw_attack(const ClassifierNet& net, const Tensor& x, const Tensor& y,
                 const AttackSpec& spec, std::uint64_t seed, std::uint64_t index_offset) {
  return projected_sign_ascent(margin_objective(net, spec.kappa), x, y, spec, seed,
                               index_offset);
}

std::uint64_t random_attack_key(std::uint64_t seed, std::uint64_t index) {
  return derive_seed(seed, stream::kRandomAttack, index);
}

Tensor random_attack_candidates(const Shape& sample_shape, double eps, std::size_t n,
                                std::uint64_t key) {
  Shape shape{n};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor out(shape);
  Rng rng(key);
  for (double& v : out.data()) v = rng.uniform(-eps, eps);
  return out;
}

Tensor random_attack(const Objective& obj, const Tensor& x, const Tensor& y, double eps,
                     std::size_t n_samples, std::uint64_t seed,
                     const std::optional<Domain>& domain, std::uint64_t index_offset) {
  if (n_samples < 1) throw Error("random_attack: n_samples must be >= 1");
  if (!(eps >= 0.0)) throw Error("random_attack: epsilon must be >= 0");
  check_batch(x, y, "random_attack");
  const std::size_t rows = x.dim(0), row = x.row_size(), classes = y.dim(1);
  const Shape sample_shape(x.shape().begin() + 1, x.shape().end());

  Tensor out = x;
  for (std::size_t i = 0; i < rows; ++i) {
    const Tensor cand =
        random_attack_candidates(sample_shape, eps, n_samples, random_attack_key(seed, index_offset + i));
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t start = 0; start < n_samples; start += kRandomChunk) {
      const std::size_t m = std::min(kRandomChunk, n_samples - start);
      Shape cs = x.shape();
      cs[0] = m;
      Tensor pts(cs);
      Tensor targets({m, classes});
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t d = 0; d < row; ++d)
          pts[k * row + d] = x[i * row + d] + cand[(start + k) * row + d];
        for (std::size_t c = 0; c < classes; ++c) targets[k * classes + c] = y[i * classes + c];
      }
      pts = clamp_to_domain(std::move(pts), domain);
      const std::vector<double> vals = objective_values(obj, pts, targets);
      for (std::size_t k = 0; k < m; ++k) {
        // Strict comparison keeps the first maximal candidate.
        if (start + k == 0 || vals[k] > best) {
          best = vals[k];
          best_k = start + k;
        }
      }
    }
    for (std::size_t d = 0; d < row; ++d) out[i * row + d] = x[i * row + d] + cand[best_k * row + d];
  }
  return clamp_to_domain(std::move(out), domain);
}

Tensor random_attack(const ClassifierNet& net, const Tensor& x, const Tensor& y, double eps,
                     std::size_t n_samples, std::uint64_t seed,
                     const std::optional<Domain>& domain, std::uint64_t index_offset) {
  return random_attack(cross_entropy_objective(net), x, y, eps, n_samples, seed, domain,
                       index_offset);
}

Tensor run_attack(const ClassifierNet& net, const Tensor& x, const Tensor& y,
                  const AttackSpec& spec, std::uint64_t seed, std::uint64_t index_offset) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::kFgsm: return fgsm(net, x, y, spec.epsilon, spec.domain);
    case AttackKind::kPgm: return pgm(net, x, y, spec, seed, index_offset);
    case AttackKind::kCw: return cw_attack(net, x, y, spec, seed, index_offset);
    case AttackKind::kRandom:
      return random_attack(net, x, y, spec.epsilon, spec.samples, seed, spec.domain,
                           index_offset);
  }
  throw Error("run_attack: unknown attack kind");
}

}  // namespace l2l
