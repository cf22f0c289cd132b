#include "l2l/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "l2l/error.hpp"

namespace l2l {
namespace {

// Per-chunk correctness counts; each chunk writes only its own slot, so
// the reduction order is fixed whatever the scheduling.
using ChunkFn = std::function<std::size_t(std::size_t begin, std::size_t end)>;

std::size_t count_in_chunks(std::size_t n, const EvalOptions& opts, const ChunkFn& fn) {
  const std::size_t chunk = std::max<std::size_t>(1, opts.chunk);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<std::size_t> hits(chunks, 0);
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.threads, chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) hits[c] = fn(c * chunk, std::min(n, (c + 1) * chunk));
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            hits[c] = fn(c * chunk, std::min(n, (c + 1) * chunk));
          } catch (...) {
            std::lock_guard<std::mutex> lock(m);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  std::size_t total = 0;
  for (std::size_t h : hits) total += h;
  return total;
}

std::size_t count_correct(const ClassifierNet& net, const Tensor& x,
                          std::span<const std::size_t> labels) {
  const std::vector<std::size_t> pred = predict(classify(net, x));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return hits;
}

void require_nonempty(const Dataset& data, const char* who) {
  if (data.size() == 0) throw Error(std::string(who) + ": dataset is empty");
}

double fraction(std::size_t hits, std::size_t n) {
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

void EvalReport::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(clean_accuracy)) throw Error("report: clean accuracy outside [0, 1]");
  for (const auto& [name, acc] : robust_accuracy) {
    if (!in_unit(acc)) throw Error("report: accuracy of " + name + " outside [0, 1]");
  }
  for (const auto& [name, c] : curves) {
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (!in_unit(c.points[i].second)) throw Error("report: curve " + name + " outside [0, 1]");
      if (i > 0 && !(c.points[i].first > c.points[i - 1].first))
        throw Error("report: curve " + name + " axis is not strictly increasing");
    }
  }
}

double clean_accuracy(const ClassifierNet& net, const Dataset& data, const EvalOptions& opts) {
  require_nonempty(data, "clean_accuracy");
  const std::vector<std::size_t> labels = data.label_indices();
  const std::size_t hits = count_in_chunks(data.size(), opts, [&](std::size_t b, std::size_t e) {
    return count_correct(net, data.inputs.slice_rows(b, e),
                         std::span<const std::size_t>(labels).subspan(b, e - b));
  });
  return fraction(hits, data.size());
}

double transfer_accuracy(const ClassifierNet& target, const ClassifierNet& source,
                         const Dataset& data, const AttackSpec& attack, std::uint64_t seed,
                         const EvalOptions& opts) {
  require_nonempty(data, "robust_accuracy");
  attack.validate();
  const std::vector<std::size_t> labels = data.label_indices();
  const std::size_t hits = count_in_chunks(data.size(), opts, [&](std::size_t b, std::size_t e) {
    const Tensor x = data.inputs.slice_rows(b, e);
    const Tensor y = data.labels.slice_rows(b, e);
    const Tensor adv = attack.epsilon == 0.0 ? x : run_attack(source, x, y, attack, seed, b);
    return count_correct(target, adv, std::span<const std::size_t>(labels).subspan(b, e - b));
  });
  return fraction(hits, data.size());
}

double robust_accuracy(const ClassifierNet& net, const Dataset& data, const AttackSpec& attack,
                       std::uint64_t seed, const EvalOptions& opts) {
  return transfer_accuracy(net, net, data, attack, seed, opts);
}

double robust_accuracy(const ClassifierNet& net, const Dataset& data,
                       const AttackerNet& attacker, const EvalOptions& opts) {
  require_nonempty(data, "robust_accuracy");
  const std::vector<std::size_t> labels = data.label_indices();
  const std::size_t hits = count_in_chunks(data.size(), opts, [&](std::size_t b, std::size_t e) {
    const Tensor x = data.inputs.slice_rows(b, e);
    const Tensor y = data.labels.slice_rows(b, e);
    const Tensor adv = learned_attack(attacker, net, x, y, data.domain);
    return count_correct(net, adv, std::span<const std::size_t>(labels).subspan(b, e - b));
  });
  return fraction(hits, data.size());
}

TransferResult blackbox_transfer_eval(const ClassifierNet& target, const ClassifierNet& surrogate,
                                      const Dataset& data, const AttackSpec& attack,
                                      std::uint64_t seed, const EvalOptions& opts) {
  TransferResult r;
  r.arch_mismatch = !(target.spec() == surrogate.spec());
  r.robust_accuracy = transfer_accuracy(target, surrogate, data, attack, seed, opts);
  return r;
}

EvalReport worst_of_k(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error("worst_of_k: no reports");
  EvalReport out = reports[0];
  out.seeds.clear();
  out.seconds = 0.0;
  for (const EvalReport& r : reports) {
    if (r.robust_accuracy.size() != out.robust_accuracy.size())
      throw Error("worst_of_k: reports cover different attack sets");
    for (const auto& [name, acc] : r.robust_accuracy) {
      auto it = out.robust_accuracy.find(name);
      if (it == out.robust_accuracy.end())
        throw Error("worst_of_k: attack " + name + " missing from the first report");
      it->second = std::min(it->second, acc);
    }
    out.clean_accuracy = std::min(out.clean_accuracy, r.clean_accuracy);
    for (const auto& [name, c] : r.curves) {
      auto it = out.curves.find(name);
      if (it == out.curves.end() || it->second.points.size() != c.points.size())
        throw Error("worst_of_k: curve " + name + " differs between runs");
      for (std::size_t i = 0; i < c.points.size(); ++i) {
        if (it->second.points[i].first != c.points[i].first)
          throw Error("worst_of_k: curve " + name + " axis differs between runs");
        it->second.points[i].second = std::min(it->second.points[i].second, c.points[i].second);
      }
    }
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
    out.seconds += r.seconds;
  }
  // Checklist outcomes pass only if they pass in every run.
  for (std::size_t i = 0; i < out.checklist.size(); ++i) {
    for (const EvalReport& r : reports) {
      if (i < r.checklist.size() && r.checklist[i].name == out.checklist[i].name)
        out.checklist[i].passed = out.checklist[i].passed && r.checklist[i].passed;
    }
  }
  return out;
}

std::string to_string(SweepAxis a) { return a == SweepAxis::kEpsilon ? "epsilon" : "steps"; }

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "epsilon") return SweepAxis::kEpsilon;
  if (s == "steps") return SweepAxis::kSteps;
  throw Error("unknown sweep axis '" + s + "' (expected epsilon | steps)");
}

AttackSpec epsilon_sweep_spec(double eps, const AttackSpec& base) {
  AttackSpec s = base;
  s.kind = AttackKind::kPgm;
  s.epsilon = eps;
  s.steps = 10;
  s.eta = eps / 10.0;
  s.init_radius = std::min(base.init_radius, eps);
  return s;
}

Curve sweep(const ClassifierNet& net, const Dataset& data, SweepAxis axis,
            std::span<const double> values, const AttackSpec& base, std::uint64_t seed,
            const EvalOptions& opts) {
  if (values.empty()) throw Error("sweep: axis has no values");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) throw Error("sweep: axis values must strictly increase");
  }
  Curve c;
  c.axis = to_string(axis);
  for (double v : values) {
    AttackSpec s;
    if (axis == SweepAxis::kEpsilon) {
      s = epsilon_sweep_spec(v, base);
    } else {
      if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw Error("sweep: step counts must be positive integers");
      s = base;
      s.steps = static_cast<std::size_t>(v);
    }
    c.points.emplace_back(v, robust_accuracy(net, data, s, seed, opts));
  }
  return c;
}

std::vector<ChecklistItem> sanity_checklist(const ClassifierNet& net, const Dataset& data,
                                            const ChecklistConfig& cfg,
                                            const ClassifierNet* surrogate,
                                            const EvalOptions& opts) {
  const double tol = cfg.tolerance;
  AttackSpec fg = cfg.base;
  fg.kind = AttackKind::kFgsm;
  AttackSpec short_pgm = cfg.base;
  short_pgm.kind = AttackKind::kPgm;
  short_pgm.steps = cfg.short_steps;
  AttackSpec long_pgm = short_pgm;
  long_pgm.steps = cfg.long_steps;
  AttackSpec rnd = cfg.base;
  rnd.kind = AttackKind::kRandom;
  rnd.samples = cfg.random_samples;

  const double acc_fgsm = robust_accuracy(net, data, fg, cfg.seed, opts);
  const double acc_short = robust_accuracy(net, data, short_pgm, cfg.seed, opts);
  const double acc_long = robust_accuracy(net, data, long_pgm, cfg.seed, opts);
  std::vector<ChecklistItem> items;

  ChecklistItem iter;
  iter.name = "iterative_beats_one_step";
  iter.measured = {{"fgsm", acc_fgsm}, {"pgm_short", acc_short}, {"pgm_long", acc_long}};
  iter.passed = acc_short <= acc_fgsm + tol && acc_long <= acc_short + tol;
  if (!iter.passed) iter.note = "one-step attack is stronger than the iterative attack";
  items.push_back(iter);

  ChecklistItem bb;
  bb.name = "blackbox_weaker_than_whitebox";
  if (surrogate) {
    const TransferResult tr = blackbox_transfer_eval(net, *surrogate, data, short_pgm, cfg.seed, opts);
    bb.measured = {{"whitebox", acc_short}, {"blackbox", tr.robust_accuracy}};
    bb.passed = tr.robust_accuracy >= acc_short - tol;
    if (!bb.passed) bb.note = "transfer attack is stronger than the white-box attack";
    if (tr.arch_mismatch) bb.note += (bb.note.empty() ? "" : "; ") + std::string("surrogate architecture differs");
  } else {
    bb.skipped = true;
    bb.note = "no surrogate supplied";
  }
  items.push_back(bb);

  ChecklistItem ub;
  ub.name = "unbounded_attack_saturates";
  {
    const AttackSpec s = epsilon_sweep_spec(cfg.unbounded_epsilon, cfg.base);
    const double acc = robust_accuracy(net, data, s, cfg.seed, opts);
    ub.measured = {{"epsilon", cfg.unbounded_epsilon}, {"robust_accuracy", acc}};
    ub.passed = acc <= cfg.unbounded_threshold;
    if (!ub.passed) ub.note = "anomaly: unbounded attack does not reach near-total success";
  }
  items.push_back(ub);

  ChecklistItem rs;
  rs.name = "random_weaker_than_gradient";
  {
    const double acc = robust_accuracy(net, data, rnd, cfg.seed, opts);
    rs.measured = {{"random", acc}, {"pgm_short", acc_short}};
    rs.passed = acc >= acc_short - tol;
    if (!rs.passed) rs.note = "random sampling beats gradient search";
  }
  items.push_back(rs);

  ChecklistItem mono;
  mono.name = "accuracy_monotone_in_epsilon";
  {
    const Curve c = sweep(net, data, SweepAxis::kEpsilon, cfg.sweep_epsilons, cfg.base, cfg.seed, opts);
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < c.points.size(); ++i)
      worst_rise = std::max(worst_rise, c.points[i].second - c.points[i - 1].second);
    mono.measured = {{"max_increase", worst_rise}};
    mono.passed = worst_rise <= tol;
    if (!mono.passed) mono.note = "robust accuracy rises with epsilon";
  }
  items.push_back(mono);
  return items;
}

}  // namespace l2l
