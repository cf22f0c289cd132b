#include "l2l/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "l2l/error.hpp"
#include "l2l/rng.hpp"

namespace l2l {
namespace {

// Attacks inside the loop see the classifier exactly as the theta step
// does: batch statistics, no running-stat updates.
constexpr bool kClassifierTrainMode = true;

std::size_t tap_of(const TrainConfig& cfg, const ClassifierNet& net) {
  return cfg.feature_tap.value_or(net.spec().tap());
}

std::uint64_t batch_key(std::uint64_t seed, std::uint64_t stream_id, std::size_t epoch,
                        std::size_t batch) {
  return derive_seed(derive_seed(seed, stream_id, epoch), stream_id, batch);
}

// theta <- theta - lr * grad mean CE(f(x_adv), targets). Returns the loss.
double classifier_step(const TrainConfig& cfg, TrainResult& st, const Tensor& x_adv,
                       const Tensor& targets, double lr) {
  ParameterSet& ps = st.net.parameters();
  ps.zero_grad();
  Graph g;
  Var logits = st.net.forward(g, g.constant(x_adv), ForwardOptions{true, true, true}).logits;
  Var loss = g.mean(g.softmax_cross_entropy(logits, g.constant(targets)));
  const double value = g.value(loss).item();
  if (!std::isfinite(value)) throw DivergenceError("loss is not finite");
  g.backward(loss);
  sgd_step(ps, st.classifier_state, lr, cfg.classifier);
  return value;
}

GradientSource dro_source(const TrainResult& st, const Tensor& y, std::size_t tap) {
  GradientSource src;
  src.mode = AttackerMode::kDro;
  src.net = &st.net;
  src.targets = &y;
  src.tap = tap;
  src.classifier_train = kClassifierTrainMode;
  return src;
}

GradientSource ait_source(const TrainResult& st, const Tensor& partner, std::size_t tap) {
  GradientSource src;
  src.mode = AttackerMode::kAit;
  src.net = &st.net;
  src.partner = &partner;
  src.tap = tap;
  src.classifier_train = kClassifierTrainMode;
  return src;
}

Tensor partner_features(const ClassifierNet& net, const Tensor& partner, std::size_t tap) {
  Graph g;
  return g.value(net.forward(g, g.constant(partner), kClassifierTrainMode).layers.at(tap - 1));
}

double accuracy_of(const ClassifierNet& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const std::vector<std::size_t> labels = data.label_indices();
  std::size_t hits = 0;
  constexpr std::size_t kChunk = 512;
  for (std::size_t s = 0; s < data.size(); s += kChunk) {
    const std::size_t e = std::min(data.size(), s + kChunk);
    const std::vector<std::size_t> pred = predict(classify(net, data.inputs.slice_rows(s, e)));
    for (std::size_t i = s; i < e; ++i) hits += pred[i - s] == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kPlain: return "plain";
    case TrainMode::kDroPgm: return "dro_pgm";
    case TrainMode::kL2lDro: return "l2l_dro";
    case TrainMode::kAit: return "ait";
    case TrainMode::kL2lAit: return "l2l_ait";
  }
  return "plain";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "plain") return TrainMode::kPlain;
  if (s == "dro_pgm") return TrainMode::kDroPgm;
  if (s == "l2l_dro") return TrainMode::kL2lDro;
  if (s == "ait") return TrainMode::kAit;
  if (s == "l2l_ait") return TrainMode::kL2lAit;
  throw Error("unknown training mode '" + s +
              "' (expected plain | dro_pgm | l2l_dro | ait | l2l_ait)");
}

bool uses_attacker(TrainMode m) { return m == TrainMode::kL2lDro || m == TrainMode::kL2lAit; }

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("train.batch_size must be > 0");
  classifier.validate("train.classifier");
  attacker.validate("train.attacker");
  if (!(epsilon >= 0.0)) throw Error("train.epsilon must be >= 0");
  if (!(epsilon_y >= 0.0 && epsilon_y <= 1.0))
    throw Error("train.epsilon_y must lie in [0, 1], got " + std::to_string(epsilon_y));
  if (mode == TrainMode::kDroPgm) {
    if (steps < 1) throw Error("train.steps must be >= 1");
    if (epsilon > 0.0 && !(eta > 0.0)) throw Error("train.eta must be > 0");
    if (!(init_radius >= 0.0) || init_radius > epsilon)
      throw Error("train.init_radius must lie in [0, train.epsilon]");
  }
  if (uses_attacker(mode) && !(epsilon > 0.0))
    throw Error("train.epsilon must be > 0 for learned attackers");
  if (!(attacker_width > 0.0)) throw Error("train.attacker_width must be > 0");
  if (feature_tap && *feature_tap == 0) throw Error("train.feature_tap must be >= 1");
}

std::vector<double> mixup_label(std::span<const double> y_i, std::span<const double> y_j,
                                double epsilon_y, std::size_t classes) {
  if (classes < 2) throw Error("mixup_label: need at least 2 classes");
  if (!(epsilon_y >= 0.0 && epsilon_y <= 1.0)) throw Error("mixup_label: epsilon_y outside [0, 1]");
  auto check = [classes](std::span<const double> y, const char* name) {
    if (y.size() != classes) throw Error(std::string("mixup_label: ") + name + " has wrong length");
    std::size_t ones = 0;
    for (double v : y) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) throw Error(std::string("mixup_label: ") + name + " is not one-hot");
  };
  check(y_i, "y_i");
  check(y_j, "y_j");
  const double denom = static_cast<double>(classes - 1);
  std::vector<double> out(classes);
  for (std::size_t c = 0; c < classes; ++c)
    out[c] = (1.0 - epsilon_y) * y_i[c] + epsilon_y * (1.0 - y_j[c]) / denom;
  return out;
}

Tensor mixup_labels(const Tensor& y_i, const Tensor& y_j, double epsilon_y) {
  if (y_i.rank() != 2 || y_i.shape() != y_j.shape())
    throw Error("mixup_labels: label batches must share shape [B, C]");
  const std::size_t b = y_i.dim(0), c = y_i.dim(1);
  Tensor out({b, c});
  for (std::size_t r = 0; r < b; ++r) {
    const std::vector<double> row = mixup_label(y_i.data().subspan(r * c, c),
                                                y_j.data().subspan(r * c, c), epsilon_y, c);
    std::copy(row.begin(), row.end(), out.data().begin() + r * c);
  }
  return out;
}

CosineResult cosine_feature_similarity(const ClassifierNet& net, std::size_t s,
                                       const Tensor& x_a, const Tensor& x_b) {
  Graph g;
  Var fa = net.forward(g, g.constant(x_a)).layers.at(s - 1);
  Var fb = net.forward(g, g.constant(x_b)).layers.at(s - 1);
  CosineResult r;
  r.q = g.value(g.cosine_similarity(fa, fb)).vec();
  r.zero_norm = g.zero_norm_warnings();
  return r;
}

std::vector<std::size_t> sample_partners(std::size_t n, std::uint64_t key) {
  std::vector<std::size_t> out(n, 0);
  if (n <= 1) return out;
  Rng rng(key);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    while (j == i) j = static_cast<std::size_t>(rng.index(n));
    out[i] = j;
  }
  return out;
}

TrainResult init_training(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data) {
  cfg.validate();
  if (data.size() > 0 && data.sample_shape() != arch.input_shape)
    throw Error("train: data samples " + shape_str(data.sample_shape()) +
                " do not match the architecture input " + shape_str(arch.input_shape));
  TrainResult st{build_classifier(arch, cfg.seed), std::nullopt, {}, {}, {}, 0};
  const std::size_t tap = tap_of(cfg, st.net);
  if (tap > arch.layer_count()) throw Error("train.feature_tap exceeds the classifier depth");
  if (uses_attacker(cfg.mode)) {
    st.attacker = build_attacker(cfg.variant, cfg.epsilon, arch.input_shape, cfg.attacker_width,
                                 cfg.seed);
  }
  return st;
}

double l2l_dro_objective(const TrainConfig& cfg, const TrainResult& st, const Tensor& x,
                         const Tensor& y, const std::optional<Domain>& domain) {
  const AttackerNet& att = st.attacker.value();
  Graph g;
  AttackerApply apply = [&att](Graph& gg, Var a) { return att.perturb(gg, a, true); };
  Var d = perturbation_graph(g, att.variant(), att.epsilon(), apply,
                             dro_source(st, y, tap_of(cfg, st.net)), x, domain);
  Var xa = clamp_to_domain(g, g.add(g.constant(x), d), domain);
  Var logits = st.net.forward(g, xa, kClassifierTrainMode).logits;
  return g.value(g.mean(g.softmax_cross_entropy(logits, g.constant(y)))).item();
}

double l2l_dro_batch(const TrainConfig& cfg, TrainResult& st, const Tensor& x, const Tensor& y,
                     const std::optional<Domain>& domain, const L2lBatchOptions& opts,
                     Tensor* adversarial) {
  AttackerNet& att = st.attacker.value();
  ParameterSet& theta = st.net.parameters();
  ParameterSet& phi = att.parameters();
  theta.zero_grad();
  phi.zero_grad();

  Graph g;
  const ForwardOptions aopt{true, opts.update_attacker, true};
  AttackerApply apply = [&att, aopt](Graph& gg, Var a) { return att.perturb(gg, a, aopt); };
  Var d = perturbation_graph(g, att.variant(), att.epsilon(), apply,
                             dro_source(st, y, tap_of(cfg, st.net)), x, domain);
  Var xa = clamp_to_domain(g, g.add(g.constant(x), d), domain);
  const ForwardOptions copt{true, opts.update_classifier, opts.update_classifier};
  Var logits = st.net.forward(g, xa, copt).logits;
  Var loss = g.mean(g.softmax_cross_entropy(logits, g.constant(y)));
  const double value = g.value(loss).item();
  if (!std::isfinite(value)) throw DivergenceError("loss is not finite");
  if (adversarial) *adversarial = g.value(xa);

  // One backward serves both players: theta descends, phi ascends.
  g.backward(loss);
  if (opts.update_classifier) sgd_step(theta, st.classifier_state, opts.classifier_lr, cfg.classifier);
  if (opts.update_attacker) adam_step(phi, st.attacker_state, cfg.attacker, true);
  return value;
}

double l2l_ait_objective(const TrainConfig& cfg, const TrainResult& st, const Tensor& x,
                         const Tensor& partner, const std::optional<Domain>& domain) {
  const AttackerNet& att = st.attacker.value();
  const std::size_t tap = tap_of(cfg, st.net);
  Graph g;
  AttackerApply apply = [&att](Graph& gg, Var a) { return att.perturb(gg, a, true); };
  Var d = perturbation_graph(g, att.variant(), att.epsilon(), apply, ait_source(st, partner, tap),
                             x, domain);
  Var xa = clamp_to_domain(g, g.add(g.constant(x), d), domain);
  Var f = st.net.forward(g, xa, kClassifierTrainMode).layers.at(tap - 1);
  Var pf = g.constant(partner_features(st.net, partner, tap));
  return g.value(g.mean(g.cosine_similarity(f, pf))).item();
}

double l2l_ait_batch(const TrainConfig& cfg, TrainResult& st, const Tensor& x,
                     const Tensor& partner, const Tensor& mixed_targets,
                     const std::optional<Domain>& domain, const L2lBatchOptions& opts,
                     Tensor* adversarial) {
  AttackerNet& att = st.attacker.value();
  const std::size_t tap = tap_of(cfg, st.net);
  ParameterSet& phi = att.parameters();
  phi.zero_grad();

  Tensor x_adv;
  {
    Graph g;
    const ForwardOptions aopt{true, opts.update_attacker, true};
    AttackerApply apply = [&att, aopt](Graph& gg, Var a) { return att.perturb(gg, a, aopt); };
    Var d = perturbation_graph(g, att.variant(), att.epsilon(), apply,
                               ait_source(st, partner, tap), x, domain);
    Var xa = clamp_to_domain(g, g.add(g.constant(x), d), domain);
    x_adv = g.value(xa);
    if (opts.update_attacker) {
      Var f = st.net.forward(g, xa, kClassifierTrainMode).layers.at(tap - 1);
      Var pf = g.constant(partner_features(st.net, partner, tap));
      Var q = g.mean(g.cosine_similarity(f, pf));
      if (!std::isfinite(g.value(q).item())) throw DivergenceError("similarity is not finite");
      g.backward(q);
      adam_step(phi, st.attacker_state, cfg.attacker, false);
    }
  }
  if (adversarial) *adversarial = x_adv;
  if (!opts.update_classifier) return 0.0;
  return classifier_step(cfg, st, x_adv, mixed_targets, opts.classifier_lr);
}

void run_training(const TrainConfig& cfg, const Dataset& data, TrainResult& st,
                  const BatchObserver& observer) {
  cfg.validate();
  if (data.size() == 0 && cfg.epochs > st.epochs_done) throw Error("train: dataset is empty");
  if (uses_attacker(cfg.mode) && !st.attacker) throw Error("train: mode needs an attacker network");
  const std::size_t n = data.size();
  const std::size_t tap = tap_of(cfg, st.net);
  const auto& domain = data.domain;

  for (std::size_t epoch = st.epochs_done; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.classifier.lr_at(epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    {
      Rng rng(derive_seed(cfg.seed, stream::kShuffle, epoch));
      std::shuffle(order.begin(), order.end(), rng.engine());
    }

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Tensor x = data.inputs.gather_rows(rows);
      const Tensor y = data.labels.gather_rows(rows);
      const std::size_t b = batches;
      try {
        double loss = 0.0;
        Tensor x_adv;
        Tensor targets = y;
        std::optional<Tensor> partner;
        switch (cfg.mode) {
          case TrainMode::kPlain:
            x_adv = x;
            loss = classifier_step(cfg, st, x_adv, y, lr);
            break;
          case TrainMode::kDroPgm: {
            AttackSpec spec;
            spec.kind = AttackKind::kPgm;
            spec.epsilon = cfg.epsilon;
            spec.eta = cfg.eta;
            spec.steps = cfg.steps;
            spec.init_radius = cfg.init_radius;
            spec.domain = domain;
            x_adv = pgm(cross_entropy_objective(st.net, kClassifierTrainMode), x, y, spec,
                        derive_seed(cfg.seed, stream::kAttack, epoch), start);
            loss = classifier_step(cfg, st, x_adv, y, lr);
            break;
          }
          case TrainMode::kL2lDro:
            loss = l2l_dro_batch(cfg, st, x, y, domain,
                                 L2lBatchOptions{true, !cfg.freeze_attacker, lr}, &x_adv);
            break;
          case TrainMode::kAit:
          case TrainMode::kL2lAit: {
            const std::vector<std::size_t> pj =
                sample_partners(rows.size(), batch_key(cfg.seed, stream::kPartner, epoch, b));
            partner = x.gather_rows(pj);
            targets = mixup_labels(y, y.gather_rows(pj), cfg.epsilon_y);
            if (cfg.mode == TrainMode::kAit) {
              const Tensor u = gradient_field(ait_source(st, *partner, tap), x);
              x_adv = x;
              for (std::size_t i = 0; i < x_adv.size(); ++i) {
                const double s = u[i] > 0.0 ? 1.0 : (u[i] < 0.0 ? -1.0 : 0.0);
                x_adv[i] = x[i] - cfg.epsilon * s;
              }
              x_adv = clamp_to_domain(std::move(x_adv), domain);
              loss = classifier_step(cfg, st, x_adv, targets, lr);
            } else {
              loss = l2l_ait_batch(cfg, st, x, *partner, targets, domain,
                                   L2lBatchOptions{true, !cfg.freeze_attacker, lr}, &x_adv);
            }
            break;
          }
        }
        loss_sum += loss;
        if (observer) observer(BatchRecord{epoch, b, x, x_adv, targets, partner ? &*partner : nullptr, loss});
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + ": " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.clean_accuracy = accuracy_of(st.net, data);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.log.epochs.push_back(rec);
    st.epochs_done = epoch + 1;
  }
}

TrainResult train(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                  const BatchObserver& observer) {
  TrainResult st = init_training(cfg, arch, data);
  run_training(cfg, data, st, observer);
  return st;
}

namespace {
TrainResult train_as(TrainMode mode, const TrainConfig& cfg, const ArchSpec& arch,
                     const Dataset& data, const BatchObserver& observer) {
  if (cfg.mode != mode)
    throw Error("train: config mode is " + to_string(cfg.mode) + ", expected " + to_string(mode));
  return train(cfg, arch, data, observer);
}
}  // namespace

TrainResult train_plain(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                        const BatchObserver& observer) {
  return train_as(TrainMode::kPlain, cfg, arch, data, observer);
}
TrainResult train_dro_pgm(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                          const BatchObserver& observer) {
  return train_as(TrainMode::kDroPgm, cfg, arch, data, observer);
}
TrainResult train_l2l_dro(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                          const BatchObserver& observer) {
  return train_as(TrainMode::kL2lDro, cfg, arch, data, observer);
}
TrainResult train_ait(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                      const BatchObserver& observer) {
  return train_as(TrainMode::kAit, cfg, arch, data, observer);
}
TrainResult train_l2l_ait(const TrainConfig& cfg, const ArchSpec& arch, const Dataset& data,
                          const BatchObserver& observer) {
  return train_as(TrainMode::kL2lAit, cfg, arch, data, observer);
}

}  // namespace l2l
