// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "l2l/checkpoint.hpp"
#include "l2l/cli.hpp"
#include "l2l/data_io.hpp"
#include "l2l/error.hpp"
#include "l2l/eval.hpp"
#include "l2l/learned_attack.hpp"
#include "l2l/minimax.hpp"
#include "l2l/report.hpp"
#include "l2l/training.hpp"
#include "primitives.hpp"

using namespace l2l;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Desk two-moons setup shared by the ordering and attack criteria.
struct Desk {
  double gap = 0.0;
  double eps = 0.0;
  std::size_t epochs = 200;
  ArchSpec arch = ArchSpec::mlp(2, {128, 128}, 2);

  Desk() {
    gap = min_interclass_linf_gap(synth_dataset(SynthKind::kTwoMoons, 1000, 0.0, 0));
    eps = 0.3 * gap;
  }
  Dataset train_set(std::uint64_t seed) const {
    return synth_dataset(SynthKind::kTwoMoons, 100, 0.15, derive_seed(seed, stream::kData, 0));
  }
  Dataset test_set(std::uint64_t seed) const {
    return synth_dataset(SynthKind::kTwoMoons, 400, 0.15, derive_seed(seed, stream::kData, 1));
  }
  TrainConfig config(TrainMode mode, AttackerVariant v, std::uint64_t seed) const {
    TrainConfig c;
    c.mode = mode;
    c.variant = v;
    c.epochs = epochs;
    c.batch_size = 32;
    c.classifier.lr = 0.1;
    c.classifier.weight_decay = 0.0;
    c.classifier.decay_epochs = {epochs / 2, 3 * epochs / 4};
    c.epsilon = eps;
    c.eta = eps * 0.007 / 0.031;
    c.steps = 10;
    c.init_radius = eps * 1e-4 / 0.031;
    c.seed = seed;
    return c;
  }
  AttackSpec pgm(std::size_t steps) const {
    AttackSpec s;
    s.kind = AttackKind::kPgm;
    s.epsilon = eps;
    s.eta = eps * 0.003 / 0.031;
    s.steps = steps;
    s.init_radius = eps * 1e-4 / 0.031;
    return s;
  }
};

ClassifierNet random_mlp(Rng& rng, std::size_t classes) {
  const std::size_t width = 4 + rng.index(12);
  ArchSpec spec = ArchSpec::mlp(2 + rng.index(4), {width}, classes);
  if (rng.uniform() < 0.3) spec.norm = NormKind::kBatch;
  if (rng.uniform() < 0.3) spec.activation = Activation::kTanh;
  return build_classifier(spec, rng.next());
}

Tensor random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<std::size_t> y(n);
  for (auto& v : y) v = rng.index(classes);
  return one_hot(y, classes);
}

bool feasible(const Tensor& x, const Tensor& adv, double eps, const std::optional<Domain>& dom) {
  if (adv.shape() != x.shape()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(std::abs(adv[i] - x[i]) <= eps + 1e-12)) return false;
    if (dom && (adv[i] < dom->lo || adv[i] > dom->hi)) return false;
  }
  return true;
}

bool on_simplex(const Tensor& t) {
  const std::size_t c = t.dim(1);
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!(t[i * c + j] >= 0.0)) return false;
      s += t[i * c + j];
    }
    if (std::abs(s - 1.0) > 1e-12) return false;
  }
  return true;
}

// 1. Finite-difference checks of every primitive.
Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (const auto& prim : l2l::testing::primitive_catalogue()) {
    for (int i = 0; i < 100; ++i) {
      const auto c = prim.make(rng);
      const double e = finite_difference_check(c.builder, c.point, 1e-5).max_rel_error;
      if (!(e <= worst)) {
        worst = e;
        worst_name = prim.name;
      }
      ++checks;
    }
  }
  const double s = seconds_since(t0);
  return {worst < 1e-4 && s < 120.0,
          fmt("%zu checks, worst rel err %.2e (%s), %.1fs", checks, worst, worst_name.c_str(), s)};
}

// 2. fgsm == pgm(T=1, eta=eps, no random start).
Verdict fgsm_equivalence() {
  Rng rng(202);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t classes = 2 + rng.index(3);
    const ClassifierNet net = random_mlp(rng, classes);
    const std::size_t d = net.spec().input_shape[0], n = 1 + rng.index(4);
    std::optional<Domain> dom;
    if (rng.uniform() < 0.5) dom = Domain{};
    const Tensor x = l2l::testing::random_tensor({n, d}, rng, dom ? 0.0 : -2.0, dom ? 1.0 : 2.0);
    const Tensor y = random_labels(n, classes, rng);
    AttackSpec s;
    s.epsilon = rng.uniform(0.001, 0.5);
    s.eta = s.epsilon;
    s.steps = 1;
    s.init_radius = 0.0;
    s.domain = dom;
    const Tensor a = fgsm(net, x, y, s.epsilon, dom);
    const Tensor b = pgm(net, x, y, s, rng.next());
    if (std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) != 0) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 instances, %zu bitwise mismatches", mismatches)};
}

// 3. Feasibility of every attack and learned-attacker variant.
Verdict feasibility() {
  Rng rng(303);
  const std::vector<std::string> names{"fgsm", "pgm", "cw", "random", "naive", "grad", "two_step", "slim"};
  std::vector<std::size_t> violations(names.size(), 0);
  const std::size_t trials = 10000;
  ClassifierNet net = random_mlp(rng, 2);
  for (std::size_t k = 0; k < trials; ++k) {
    if (k % 100 == 0) net = random_mlp(rng, 2 + rng.index(3));
    const std::size_t d = net.spec().input_shape[0], classes = net.spec().classes;
    const std::size_t n = 1 + rng.index(4);
    std::optional<Domain> dom;
    if (rng.uniform() < 0.7) dom = Domain{};
    const Tensor x = l2l::testing::random_tensor({n, d}, rng, dom ? 0.0 : -2.0, dom ? 1.0 : 2.0);
    const Tensor y = random_labels(n, classes, rng);
    AttackSpec s;
    s.epsilon = rng.uniform(1e-3, 0.6);
    s.eta = s.epsilon * rng.uniform(0.05, 1.5);
    s.steps = 1 + rng.index(8);
    s.init_radius = rng.uniform() < 0.5 ? 0.0 : s.epsilon * rng.uniform(0.0, 1.0);
    s.kappa = rng.uniform(0.0, 2.0);
    s.samples = 1 + rng.index(20);
    s.domain = dom;
    const std::uint64_t seed = rng.next();
    const Tensor a[] = {fgsm(net, x, y, s.epsilon, dom), pgm(net, x, y, s, seed), cw_attack(net, x, y, s, seed),
                        random_attack(net, x, y, s.epsilon, s.samples, seed, dom)};
    for (std::size_t j = 0; j < 4; ++j) violations[j] += !feasible(x, a[j], s.epsilon, dom);
    const AttackerVariant variants[] = {AttackerVariant::kNaive, AttackerVariant::kGrad, AttackerVariant::kTwoStep,
                                        AttackerVariant::kSlim};
    for (std::size_t j = 0; j < 4; ++j) {
      AttackerNet at = build_attacker(variants[j], s.epsilon, {d}, 0.125, rng.next());
      auto p = at.parameters().flat();
      const double scale = std::pow(10.0, rng.uniform(-1.0, 1.5));
      for (auto& w : p) w *= scale;
      at.parameters().set_flat(p);
      violations[4 + j] += !feasible(x, learned_attack(at, net, x, y, dom), s.epsilon, dom);
    }
  }
  std::size_t total = 0;
  std::string detail = fmt("%zu invocations each:", trials);
  for (std::size_t j = 0; j < names.size(); ++j) {
    total += violations[j];
    detail += fmt(" %s=%zu", names[j].c_str(), violations[j]);
  }
  return {total == 0, detail + " violations"};
}

// 4. generate_perturbation stays inside [-eps, eps].
Verdict constraint_layer() {
  Rng rng(404);
  std::size_t violations = 0;
  double max_ratio = 0.0;
  const AttackerVariant variants[] = {AttackerVariant::kNaive, AttackerVariant::kGrad, AttackerVariant::kTwoStep,
                                      AttackerVariant::kSlim};
  for (int k = 0; k < 10000; ++k) {
    const AttackerVariant v = variants[k % 4];
    const bool image = k % 10 == 0;
    const Shape sample = image ? Shape{1, 4, 4} : Shape{2 + rng.index(3)};
    const double eps = std::pow(10.0, rng.uniform(-4.0, 0.0));
    AttackerNet at = build_attacker(v, eps, sample, 0.125, rng.next());
    auto p = at.parameters().flat();
    const double scale = std::pow(10.0, rng.uniform(-1.0, 2.0));
    for (auto& w : p) w *= scale;
    at.parameters().set_flat(p);
    Shape in = at.input_shape();
    in.insert(in.begin(), 1 + rng.index(3));
    const Tensor a = l2l::testing::random_tensor(in, rng, -50.0, 50.0);
    const Tensor delta = generate_perturbation(at, a);
    for (double dv : l2l::testing::values(delta)) {
      if (!(std::abs(dv) <= eps)) ++violations;
      max_ratio = std::max(max_ratio, std::abs(dv) / eps);
    }
  }
  return {violations == 0, fmt("10000 draws, %zu violations, max |delta|/eps %.17g", violations, max_ratio)};
}

// 5. Limiting cycle of simultaneous GDA on xy.
Verdict limiting_cycle() {
  const auto t0 = Clock::now();
  const double eta = 1e-4;
  const std::size_t n = 100000;
  const GdaTrajectory t = gda_bilinear({1.0, 0.0}, eta, n);
  double worst = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double r = std::hypot(t.points[i].first, t.points[i].second);
    worst = std::max(worst, std::abs(r - gda_closed_form_radius(1.0, eta, i)));
  }
  const CycleDiagnostics d = cycle_diagnostics(t);
  const double s = seconds_since(t0);
  const bool ok = worst <= 1e-12 && d.final_radius >= 1.00049 && d.final_radius <= 1.00051 && d.monotone && s < 10.0;
  return {ok, fmt("max |r - closed form| %.2e, final radius %.8f, monotone %s, %.2fs", worst, d.final_radius,
                  d.monotone ? "yes" : "no", s)};
}

// 6. Robustness ordering, worst of five reruns.
Verdict robustness_ordering(const Desk& desk) {
  const auto t0 = Clock::now();
  struct Method {
    const char* name;
    TrainMode mode;
    AttackerVariant variant;
    double worst = 1.0;
  };
  std::vector<Method> ms{{"plain", TrainMode::kPlain, AttackerVariant::kGrad},
                         {"dro_pgm", TrainMode::kDroPgm, AttackerVariant::kGrad},
                         {"l2l_grad", TrainMode::kL2lDro, AttackerVariant::kGrad},
                         {"l2l_two_step", TrainMode::kL2lDro, AttackerVariant::kTwoStep},
                         {"l2l_naive", TrainMode::kL2lDro, AttackerVariant::kNaive}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset tr = desk.train_set(seed), te = desk.test_set(seed);
    for (auto& m : ms) {
      const TrainResult r = train(desk.config(m.mode, m.variant, seed), desk.arch, tr);
      m.worst = std::min(m.worst, robust_accuracy(r.net, te, desk.pgm(20), seed));
    }
  }
  const double plain = ms[0].worst, dro = ms[1].worst, grad = ms[2].worst, two = ms[3].worst, naive = ms[4].worst;
  const bool a = dro - plain >= 0.10, b = grad >= dro - 0.05, c = two >= grad - 0.02, d = naive < grad - 0.10;
  const double s = seconds_since(t0);
  const char* yn[] = {"FAIL", "ok"};
  return {a && b && c && d && s < 900.0,
          fmt("eps %.4f (gap %.4f); worst-of-5 PGM-20: plain %.3f dro_pgm %.3f grad %.3f two_step %.3f naive %.3f; "
              "(a) %s (b) %s (c) %s (d) %s; %.0fs",
              desk.eps, desk.gap, plain, dro, grad, two, naive, yn[a], yn[b], yn[c], yn[d], s)};
}

// 7. Attack strength ordering on a trained desk net.
Verdict attack_ordering(const Desk& desk) {
  const Dataset tr = desk.train_set(7), te = desk.test_set(7);
  const TrainResult r = train(desk.config(TrainMode::kDroPgm, AttackerVariant::kGrad, 7), desk.arch, tr);
  AttackSpec f = desk.pgm(1);
  f.kind = AttackKind::kFgsm;
  AttackSpec rnd = desk.pgm(1);
  rnd.kind = AttackKind::kRandom;
  rnd.samples = 1000;
  const double p100 = robust_accuracy(r.net, te, desk.pgm(100), 1);
  const double p20 = robust_accuracy(r.net, te, desk.pgm(20), 1);
  const double fg = robust_accuracy(r.net, te, f, 1);
  const double ra = robust_accuracy(r.net, te, rnd, 1);
  const bool ok = p100 <= p20 && p20 <= fg + 0.01 && ra >= p20 - 0.01;
  return {ok, fmt("PGM-100 %.4f, PGM-20 %.4f, FGSM %.4f, Random-1000 %.4f", p100, p20, fg, ra)};
}

// 8. Unbounded epsilon sweep saturates.
Verdict unbounded_saturation(const Desk& desk) {
  const Dataset raw = desk.train_set(8);
  const BoxMap box = fit_unit_box(raw, 0.1);
  const Dataset tr = apply_unit_box(raw, box), te = apply_unit_box(desk.test_set(8), box);
  const double gap_unit = min_interclass_linf_gap(apply_unit_box(synth_dataset(SynthKind::kTwoMoons, 1000, 0.0, 0), box));
  TrainConfig c = desk.config(TrainMode::kDroPgm, AttackerVariant::kGrad, 8);
  c.epsilon = 0.3 * gap_unit;
  c.eta = c.epsilon * 0.007 / 0.031;
  c.init_radius = c.epsilon * 1e-4 / 0.031;
  c.classifier.lr = 0.3;
  const TrainResult r = train(c, desk.arch, tr);
  AttackSpec base;
  base.init_radius = 0.0;
  base.domain = te.domain;
  const std::vector<double> eps{0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0};
  const Curve curve = sweep(r.net, te, SweepAxis::kEpsilon, eps, base, 3);
  bool monotone = true;
  std::string pts;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i > 0 && curve.points[i].second > curve.points[i - 1].second + 0.01) monotone = false;
    pts += fmt("%s%.2f:%.3f", i ? " " : "", curve.points[i].first, curve.points[i].second);
  }
  const double last = curve.points.back().second;
  return {last <= 0.10 && monotone, fmt("unit-box moons, PGM-10 eta=eps/10: %s", pts.c_str())};
}

// 9. Transfer attacks are no stronger than white-box ones.
Verdict blackbox_sanity(const Desk& desk) {
  std::size_t good = 0;
  std::string gaps;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Dataset tr = desk.train_set(20 + k), te = desk.test_set(20 + k);
    const TrainResult target = train(desk.config(TrainMode::kDroPgm, AttackerVariant::kGrad, 20 + k), desk.arch, tr);
    const TrainResult surrogate = train(desk.config(TrainMode::kDroPgm, AttackerVariant::kGrad, 120 + k), desk.arch, tr);
    const double white = robust_accuracy(target.net, te, desk.pgm(20), k);
    const TransferResult t = blackbox_transfer_eval(target.net, surrogate.net, te, desk.pgm(20), k);
    good += t.robust_accuracy >= white - 0.01;
    gaps += fmt("%s%+.3f", k ? " " : "", t.robust_accuracy - white);
  }
  return {good >= 9, fmt("%zu/10 trials transfer >= white-box - 1pt; transfer - white: %s", good, gaps.c_str())};
}

// 10. Label interpolation arithmetic and AIT invariants.
Verdict mixup_arithmetic() {
  Rng rng(1010);
  double worst = 0.0;
  std::size_t off_simplex = 0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t c = 2 + rng.index(99);
    const double ey = rng.uniform();
    std::vector<double> yi(c, 0.0), yj(c, 0.0);
    yi[rng.index(c)] = 1.0;
    yj[rng.index(c)] = 1.0;
    const auto out = mixup_label(yi, yj, ey, c);
    double sum = 0.0;
    for (std::size_t m = 0; m < c; ++m) {
      const double ref = (1.0 - ey) * yi[m] + ey * (1.0 - yj[m]) / static_cast<double>(c - 1);
      worst = std::max(worst, std::abs(out[m] - ref));
      if (out[m] < 0.0) ++off_simplex;
      sum += out[m];
    }
    if (std::abs(sum - 1.0) > 1e-12) ++off_simplex;
  }
  const Dataset d = synth_dataset(SynthKind::kTwoMoons, 200, 0.1, 5);
  std::size_t steps = 0, broken = 0;
  for (TrainMode mode : {TrainMode::kAit, TrainMode::kL2lAit}) {
    TrainConfig c;
    c.mode = mode;
    c.epochs = 20;
    c.batch_size = 32;
    c.epsilon = 0.1;
    c.eta = 0.02;
    c.steps = 5;
    c.seed = 3;
    train(c, ArchSpec::mlp(2, {32, 32}, 2), d, [&](const BatchRecord& r) {
      ++steps;
      if (!on_simplex(r.targets) || !feasible(r.clean, r.adversarial, c.epsilon, d.domain)) ++broken;
    });
  }
  const bool ok = worst <= 1e-15 && off_simplex == 0 && broken == 0;
  return {ok, fmt("10000 labels, max err %.2e, %zu off simplex; %zu training steps (ait + l2l_ait), %zu invariant breaks",
                  worst, off_simplex, steps, broken)};
}

// 11. One phi step moves the follower objective the right way.
Verdict first_order_checks() {
  const Dataset d = synth_dataset(SynthKind::kTwoMoons, 400, 0.1, 11);
  const ArchSpec arch = ArchSpec::mlp(2, {32, 32}, 2);
  auto base = [&](TrainMode mode) {
    TrainConfig c;
    c.mode = mode;
    c.epochs = 3;
    c.batch_size = 32;
    c.epsilon = 0.1;
    c.eta = 0.02;
    c.attacker.lr = 1e-5;
    c.seed = 4;
    return c;
  };
  Rng rng(1111);
  auto batch = [&]() {
    std::vector<std::size_t> rows(32);
    for (auto& r : rows) r = rng.index(d.size());
    return rows;
  };
  const TrainConfig cd = base(TrainMode::kL2lDro);
  const TrainResult sd = train(cd, arch, d);
  std::size_t dro_bad = 0;
  for (int i = 0; i < 50; ++i) {
    const auto rows = batch();
    const Tensor x = d.inputs.gather_rows(rows), y = d.labels.gather_rows(rows);
    TrainResult st = sd;
    const double before = l2l_dro_objective(cd, st, x, y, d.domain);
    l2l_dro_batch(cd, st, x, y, d.domain, L2lBatchOptions{false, true, 0.0});
    dro_bad += l2l_dro_objective(cd, st, x, y, d.domain) < before;
  }
  const TrainConfig ca = base(TrainMode::kL2lAit);
  const TrainResult sa = train(ca, arch, d);
  std::size_t ait_bad = 0;
  for (int i = 0; i < 50; ++i) {
    const auto rows = batch();
    const Tensor x = d.inputs.gather_rows(rows), y = d.labels.gather_rows(rows);
    const auto pj = sample_partners(rows.size(), rng.next());
    const Tensor partner = x.gather_rows(pj);
    const Tensor targets = mixup_labels(y, y.gather_rows(pj), ca.epsilon_y);
    TrainResult st = sa;
    const double before = l2l_ait_objective(ca, st, x, partner, d.domain);
    l2l_ait_batch(ca, st, x, partner, targets, d.domain, L2lBatchOptions{false, true, 0.0});
    ait_bad += l2l_ait_objective(ca, st, x, partner, d.domain) > before;
  }
  return {dro_bad <= 2 && ait_bad <= 2,
          fmt("l2l_dro ascent violations %zu/50, l2l_ait descent violations %zu/50", dro_bad, ait_bad)};
}

// 12. Byte-exact formats.
Verdict persistence() {
  std::vector<std::string> bad;
  const std::vector<std::uint8_t> idx{0, 0, 8, 2, 0, 0, 0, 2, 0, 0, 0, 3, 0, 1, 2, 3, 4, 5};
  const IdxArray a = parse_idx(idx);
  bool idx_ok = a.shape == Shape{2, 3} && encode_idx(a) == idx;
  for (std::size_t i = 0; i < 6; ++i) idx_ok = idx_ok && a.bytes[i] == i;
  try {
    parse_idx({0, 0, 8, 0x99, 0, 0, 0, 2});
    idx_ok = false;
  } catch (const Error&) {
  }
  if (!idx_ok) bad.push_back("idx");

  std::vector<std::uint8_t> rec(kCifarRecord, 255);
  rec[0] = 3;
  const Dataset cd = parse_cifar_binary(rec);
  bool cifar_ok = cd.size() == 1 && cd.label_indices()[0] == 3;
  for (double v : l2l::testing::values(cd.inputs)) cifar_ok = cifar_ok && v == 1.0;
  cifar_ok = cifar_ok && parse_cifar_binary({}).size() == 0;
  try {
    parse_cifar_binary(std::vector<std::uint8_t>(3074, 0));
    cifar_ok = false;
  } catch (const Error&) {
  }
  if (!cifar_ok) bad.push_back("cifar");

  const auto dir = l2l::testing::temp_dir("acceptance_persistence");
  ArchSpec spec = ArchSpec::mlp(3, {7, 5}, 4);
  spec.norm = NormKind::kBatch;
  const ClassifierNet net = build_classifier(spec, 12);
  OptimizerState os;
  os.kind = OptimizerKind::kSgd;
  os.m.assign(net.parameters().count(), 0.125);
  os.step = 9;
  const Checkpoint ck = make_checkpoint(net, os, 3, 0xfeedULL);
  save_checkpoint(ck, dir / "c.ckpt");
  const Checkpoint back = load_checkpoint(dir / "c.ckpt");
  const ClassifierNet restored = restore_classifier(back);
  const auto p0 = net.parameters().flat(), p1 = restored.parameters().flat();
  if (!(back == ck) || p0.size() != p1.size() || std::memcmp(p0.data(), p1.data(), p0.size() * 8) != 0)
    bad.push_back("checkpoint");

  EvalReport r;
  r.clean_accuracy = 0.875;
  r.robust_accuracy = {{"FGSM", 0.6}, {"PGM-20", 0.54}};
  r.curves["epsilon"] = Curve{"epsilon", {{0.0, 0.875}, {0.1, 1.0 / 3.0}}};
  r.seeds = {1, 2};
  r.config_hash = "0123456789abcdef";
  r.prng = "mt19937_64";
  r.mode = "full";
  emit_report(r, dir / "a");
  r.seconds = 42.0;
  emit_report(r, dir / "b");
  for (const char* f : {"report.json", "summary.csv", "curve_epsilon.csv"})
    if (read_file_bytes(dir / "a" / f) != read_file_bytes(dir / "b" / f)) bad.push_back(std::string("emit:") + f);

  std::string detail = "idx, cifar, checkpoint, emit_report";
  if (!bad.empty()) {
    detail = "failed:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

// 13. Two train + eval runs give the same report.json.
Verdict determinism() {
  const auto dir = l2l::testing::temp_dir("acceptance_determinism");
  write_text_atomic(dir / "c.json", R"({
  "seed": 13,
  "data": {"kind": "two_moons", "n_train": 200, "n_test": 100, "noise": 0.1, "unit_box": true},
  "arch": {"widths": [32, 32]},
  "train": {"mode": "l2l_dro", "epochs": 10, "batch_size": 32, "epsilon": 0.05, "eta": 0.01,
            "init_radius": 0.0001, "variant": "two_step"},
  "eval": {"epsilon": 0.05, "eta": 0.005, "pgm_steps": [20, 100], "cw_steps": [100],
           "random_samples": 1000, "sweep_epsilons": [0, 0.05, 0.1, 0.2], "checklist": true, "threads": 2}
})");
  std::vector<std::string> reports;
  for (int i = 0; i < 2; ++i) {
    const std::string run = (dir / ("run" + std::to_string(i))).string();
    const std::string ev = (dir / ("eval" + std::to_string(i))).string();
    std::ostringstream out, err;
    const std::vector<std::string> t{"train", "--config", (dir / "c.json").string(), "--out", run};
    if (dispatch(t, out, err) != 0) return {false, "train failed: " + err.str()};
    const std::vector<std::string> e{"eval", "--config", (dir / "c.json").string(), "--out", ev,
                                     "--checkpoint", run + "/classifier.ckpt", "--attacker", run + "/attacker.ckpt"};
    if (dispatch(e, out, err) != 0) return {false, "eval failed: " + err.str()};
    const auto bytes = read_file_bytes(std::filesystem::path(ev) / "report.json");
    reports.emplace_back(bytes.begin(), bytes.end());
  }
  return {reports[0] == reports[1] && !reports[0].empty(),
          fmt("report.json %zu bytes, runs %s", reports[0].size(), reports[0] == reports[1] ? "identical" : "differ")};
}

}  // namespace

int main() {
  const Desk desk;
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, gradient_correctness},
      {2, fgsm_equivalence},
      {3, feasibility},
      {4, constraint_layer},
      {5, limiting_cycle},
      {6, [&] { return robustness_ordering(desk); }},
      {7, [&] { return attack_ordering(desk); }},
      {8, [&] { return unbounded_saturation(desk); }},
      {9, [&] { return blackbox_sanity(desk); }},
      {10, mixup_arithmetic},
      {11, first_order_checks},
      {12, persistence},
      {13, determinism},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", id, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
