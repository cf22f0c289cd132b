#include "l2l/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "l2l/checkpoint.hpp"
#include "l2l/data_io.hpp"
#include "l2l/error.hpp"
#include "l2l/minimax.hpp"
#include "l2l/report.hpp"
#include "l2l/rng.hpp"
#include "l2l/training.hpp"

namespace l2l {
namespace {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string prng_name() { return std::string(kPrngName) + " seeded via splitmix64"; }

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

AttackSpec eval_spec(const RunConfig& cfg, const Dataset& data, AttackKind kind,
                     std::size_t steps) {
  AttackSpec s;
  s.kind = kind;
  s.epsilon = cfg.eval.epsilon;
  s.eta = cfg.eval.eta;
  s.init_radius = cfg.eval.init_radius;
  s.kappa = cfg.eval.kappa;
  s.steps = steps;
  s.domain = data.domain;
  return s;
}

std::size_t random_samples(const RunConfig& cfg, bool fast) {
  return fast ? std::min(cfg.eval.fast_random_samples, cfg.eval.random_samples)
              : cfg.eval.random_samples;
}

// Named attack battery; fast mode caps every iteration count at 20.
std::vector<std::pair<std::string, AttackSpec>> battery(const RunConfig& cfg, const Dataset& data,
                                                        bool fast) {
  std::vector<std::pair<std::string, AttackSpec>> out;
  auto add = [&](const std::string& name, const AttackSpec& s) {
    for (const auto& p : out)
      if (p.first == name) return;
    out.emplace_back(name, s);
  };
  if (cfg.eval.fgsm) add("FGSM", eval_spec(cfg, data, AttackKind::kFgsm, 1));
  for (std::size_t t : cfg.eval.pgm_steps) {
    if (fast) t = std::min<std::size_t>(t, 20);
    add("PGM-" + std::to_string(t), eval_spec(cfg, data, AttackKind::kPgm, t));
  }
  for (std::size_t t : cfg.eval.cw_steps) {
    if (fast) t = std::min<std::size_t>(t, 20);
    add("CW-" + std::to_string(t), eval_spec(cfg, data, AttackKind::kCw, t));
  }
  const std::size_t n = random_samples(cfg, fast);
  if (n > 0) {
    AttackSpec s = eval_spec(cfg, data, AttackKind::kRandom, 1);
    s.samples = n;
    add("Random-" + std::to_string(n), s);
  }
  return out;
}

Dataset eval_subset(const RunConfig& cfg, const Dataset& test, bool fast) {
  return fast && cfg.eval.fast_max_samples > 0 ? take_evenly(test, cfg.eval.fast_max_samples)
                                               : test;
}

ClassifierNet load_classifier_file(const fs::path& p) {
  const Checkpoint c = load_checkpoint(p);
  if (c.kind != CheckpointKind::kClassifier) throw Error(p.string() + " is not a classifier checkpoint");
  return restore_classifier(c);
}

AttackerNet load_attacker_file(const fs::path& p) {
  const Checkpoint c = load_checkpoint(p);
  if (c.kind != CheckpointKind::kAttacker) throw Error(p.string() + " is not an attacker checkpoint");
  return restore_attacker(c);
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool fast = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON run configuration")->required();
  sub->add_option("--out", c.out, "output directory")->required();
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_flag("--fast", c.fast, "reduced attack budgets and test subset");
}

RunConfig load_run_config(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (c.seed) set_seed(cfg, *c.seed);
  return cfg;
}

int cmd_train(const Common& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_run_config(c);
  const DataSplits data = load_data(cfg);
  const ArchSpec arch = resolve_arch(cfg, data.train);
  TrainResult r = train(cfg.train, arch, data.train);
  const std::uint64_t hash = config_hash(cfg);
  const fs::path dir(c.out);
  ensure_dir(dir);
  save_checkpoint(make_checkpoint(r.net, r.classifier_state, r.epochs_done, hash),
                  dir / "classifier.ckpt");
  if (r.attacker)
    save_checkpoint(make_checkpoint(*r.attacker, r.attacker_state, r.epochs_done, hash),
                    dir / "attacker.ckpt");
  write_text_atomic(dir / "trainlog.json", trainlog_to_json(r.log));
  write_text_atomic(dir / "trainlog.csv", trainlog_csv(r.log));
  write_text_atomic(dir / "config.json", canonical_config(cfg) + "\n");
  const EpochRecord* last = r.log.epochs.empty() ? nullptr : &r.log.epochs.back();
  char line[160];
  std::snprintf(line, sizeof line, "trained %s for %zu epochs: loss %.4f, train acc %.4f (%.1fs)\n",
                to_string(cfg.train.mode).c_str(), r.epochs_done, last ? last->loss : 0.0,
                last ? last->clean_accuracy : 0.0, elapsed(t0));
  out << line;
  return 0;
}

void write_timing(const fs::path& dir, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "seconds,%.3f\n", seconds);
  write_text_atomic(dir / "timing.csv", buf);
}

void print_summary(const EvalReport& r, std::ostream& out) { out << summary_csv(r); }

int cmd_eval(const Common& c, const std::string& ckpt, const std::string& attacker_path,
             const std::string& surrogate_path, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_run_config(c);
  const DataSplits data = load_data(cfg);
  const ClassifierNet net = load_classifier_file(ckpt);
  std::optional<AttackerNet> attacker;
  if (!attacker_path.empty()) attacker = load_attacker_file(attacker_path);
  std::optional<ClassifierNet> surrogate;
  if (!surrogate_path.empty()) surrogate = load_classifier_file(surrogate_path);
  EvalReport r = evaluate_model(cfg, net, attacker ? &*attacker : nullptr,
                                surrogate ? &*surrogate : nullptr, data.test, c.fast);
  r.seconds = elapsed(t0);
  emit_report(r, c.out);
  write_timing(c.out, r.seconds);
  print_summary(r, out);
  return 0;
}

int cmd_attack(const Common& c, const std::string& ckpt, const std::string& attacker_path,
               const std::string& kind, std::optional<std::size_t> steps, std::size_t count,
               std::ostream& out) {
  const RunConfig cfg = load_run_config(c);
  const DataSplits data = load_data(cfg);
  const ClassifierNet net = load_classifier_file(ckpt);
  const Dataset test = eval_subset(cfg, data.test, c.fast);
  const EvalOptions opts{cfg.eval.threads, 64};
  EvalReport r;
  r.clean_accuracy = clean_accuracy(net, test, opts);
  r.seeds = {cfg.seed};
  r.config_hash = hex64(config_hash(cfg));
  r.prng = prng_name();
  r.mode = c.fast ? "fast" : "full";

  const std::size_t k = std::min(count, test.size());
  const Dataset shown = take_evenly(test, k);
  std::string name;
  Tensor adv;
  if (kind == "learned") {
    if (attacker_path.empty()) throw Error("attack learned needs --attacker");
    const AttackerNet a = load_attacker_file(attacker_path);
    name = "L2L-" + to_string(a.variant());
    r.robust_accuracy[name] = robust_accuracy(net, test, a, opts);
    adv = learned_attack(a, net, shown.inputs, shown.labels, shown.domain);
  } else {
    const AttackKind ak = parse_attack_kind(kind);
    std::size_t t = steps.value_or(ak == AttackKind::kFgsm ? 1 : 20);
    AttackSpec s = eval_spec(cfg, test, ak, t);
    if (ak == AttackKind::kRandom) {
      s.samples = random_samples(cfg, c.fast);
      t = s.samples;
    }
    name = ak == AttackKind::kFgsm ? "FGSM"
           : ak == AttackKind::kPgm ? "PGM-" + std::to_string(t)
           : ak == AttackKind::kCw  ? "CW-" + std::to_string(t)
                                    : "Random-" + std::to_string(t);
    r.robust_accuracy[name] = robust_accuracy(net, test, s, cfg.seed, opts);
    adv = run_attack(net, shown.inputs, shown.labels, s, cfg.seed);
  }
  emit_report(r, c.out);
  if (shown.inputs.rank() == 4 && k > 0) {
    render_perturbation_grid(shown.inputs, {{name, adv}}, cfg.eval.epsilon, c.out);
  } else if (k > 0) {
    // Vector data: the perturbed points as CSV.
    std::string s = "index,coordinate,clean,adversarial\n";
    const std::size_t row = shown.inputs.row_size();
    char buf[96];
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < row; ++j) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", i, j, shown.inputs[i * row + j],
                      adv[i * row + j]);
        s += buf;
      }
    write_text_atomic(fs::path(c.out) / ("points_" + name + ".csv"), s);
  }
  print_summary(r, out);
  return 0;
}

int cmd_sweep(const Common& c, const std::string& ckpt, const std::string& axis_name,
              const std::vector<double>& values, std::ostream& out) {
  const RunConfig cfg = load_run_config(c);
  const DataSplits data = load_data(cfg);
  const ClassifierNet net = load_classifier_file(ckpt);
  const Dataset test = eval_subset(cfg, data.test, c.fast);
  const SweepAxis axis = parse_sweep_axis(axis_name);
  EvalReport r;
  r.clean_accuracy = clean_accuracy(net, test, {cfg.eval.threads, 64});
  r.seeds = {cfg.seed};
  r.config_hash = hex64(config_hash(cfg));
  r.prng = prng_name();
  r.mode = c.fast ? "fast" : "full";
  const AttackSpec base = eval_spec(cfg, test, AttackKind::kPgm, 20);
  r.curves[to_string(axis)] = sweep(net, test, axis, values, base, cfg.seed, {cfg.eval.threads, 64});
  emit_report(r, c.out);
  out << curve_csv(r.curves[to_string(axis)]);
  return 0;
}

int cmd_demo_cycle(const std::string& out_dir, double x0, double y0, double eta,
                   std::size_t steps, std::size_t stride, std::ostream& out) {
  if (!(eta > 0.0)) throw Error("demo-cycle: --eta must be > 0");
  if (stride == 0) throw Error("demo-cycle: --stride must be >= 1");
  const GdaTrajectory traj = gda_bilinear({x0, y0}, eta, steps);
  const CycleDiagnostics d = cycle_diagnostics(traj);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  std::ostringstream csv;
  write_trajectory_csv(traj, csv, stride);
  write_text_atomic(dir / "trajectory.csv", csv.str());
  const nlohmann::json j = {{"eta", eta},
                            {"steps", steps},
                            {"start", {x0, y0}},
                            {"min_radius", d.min_radius},
                            {"max_radius", d.max_radius},
                            {"final_radius", d.final_radius},
                            {"closed_form_final_radius",
                             gda_closed_form_radius(std::hypot(x0, y0), eta, steps)},
                            {"monotone", d.monotone},
                            {"min_distance_to_origin", d.min_distance_to_origin}};
  write_text_atomic(dir / "cycle.json", j.dump(2) + "\n");
  char line[200];
  std::snprintf(line, sizeof line, "radius min %.15f max %.15f final %.15f monotone %s\n",
                d.min_radius, d.max_radius, d.final_radius, d.monotone ? "yes" : "no");
  out << line;
  return 0;
}

}  // namespace

EvalReport evaluate_model(const RunConfig& cfg, const ClassifierNet& net,
                          const AttackerNet* attacker, const ClassifierNet* surrogate,
                          const Dataset& full_test, bool fast) {
  const Dataset test = eval_subset(cfg, full_test, fast);
  const EvalOptions opts{cfg.eval.threads, 64};
  EvalReport r;
  r.clean_accuracy = clean_accuracy(net, test, opts);
  for (const auto& [name, spec] : battery(cfg, test, fast)) {
    r.robust_accuracy[name] = robust_accuracy(net, test, spec, cfg.seed, opts);
    if (surrogate && spec.kind != AttackKind::kRandom)
      r.robust_accuracy["Transfer-" + name] =
          blackbox_transfer_eval(net, *surrogate, test, spec, cfg.seed, opts).robust_accuracy;
  }
  if (attacker && cfg.eval.learned_attacker)
    r.robust_accuracy["L2L-" + to_string(attacker->variant())] =
        robust_accuracy(net, test, *attacker, opts);
  const AttackSpec base = eval_spec(cfg, test, AttackKind::kPgm, 20);
  if (!cfg.eval.sweep_epsilons.empty())
    r.curves["epsilon"] = sweep(net, test, SweepAxis::kEpsilon, cfg.eval.sweep_epsilons, base,
                                cfg.seed, opts);
  if (!cfg.eval.sweep_steps.empty())
    r.curves["steps"] =
        sweep(net, test, SweepAxis::kSteps, cfg.eval.sweep_steps, base, cfg.seed, opts);
  if (cfg.eval.checklist) {
    ChecklistConfig cc;
    cc.base = base;
    cc.short_steps = 20;
    cc.long_steps = fast ? 20 : 100;
    cc.random_samples = std::min<std::size_t>(random_samples(cfg, fast), 1000);
    if (!cfg.eval.sweep_epsilons.empty()) cc.sweep_epsilons = cfg.eval.sweep_epsilons;
    cc.seed = cfg.seed;
    r.checklist = sanity_checklist(net, test, cc, surrogate, opts);
  }
  r.seeds = {cfg.seed};
  r.config_hash = hex64(config_hash(cfg));
  r.prng = prng_name();
  r.mode = fast ? "fast" : "full";
  return r;
}

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"l2l: adversarial training lab", "l2l"};
  app.require_subcommand(1);

  Common tr, ev, at, sw;
  CLI::App* train_cmd = app.add_subcommand("train", "train a classifier (and attacker)");
  add_common(train_cmd, tr);

  std::string ev_ckpt, ev_attacker, ev_surrogate;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against the attack battery");
  add_common(eval_cmd, ev);
  eval_cmd->add_option("--checkpoint", ev_ckpt, "classifier checkpoint")->required();
  eval_cmd->add_option("--attacker", ev_attacker, "learned attacker checkpoint");
  eval_cmd->add_option("--surrogate", ev_surrogate, "black-box surrogate checkpoint");

  std::string at_ckpt, at_attacker, at_kind = "pgm";
  std::optional<std::size_t> at_steps;
  std::size_t at_count = 8;
  CLI::App* attack_cmd = app.add_subcommand("attack", "run one attack and write examples");
  add_common(attack_cmd, at);
  attack_cmd->add_option("--checkpoint", at_ckpt, "classifier checkpoint")->required();
  attack_cmd->add_option("--attacker", at_attacker, "learned attacker checkpoint");
  attack_cmd->add_option("--attack", at_kind, "fgsm | pgm | cw | random | learned")
      ->check(CLI::IsMember({"fgsm", "pgm", "cw", "random", "learned"}));
  attack_cmd->add_option("--steps", at_steps, "iterations (pgm, cw)");
  attack_cmd->add_option("--count", at_count, "examples to render");

  std::string sw_ckpt, sw_axis = "epsilon";
  std::vector<double> sw_values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "robust accuracy curve over epsilon or steps");
  add_common(sweep_cmd, sw);
  sweep_cmd->add_option("--checkpoint", sw_ckpt, "classifier checkpoint")->required();
  sweep_cmd->add_option("--axis", sw_axis, "epsilon | steps")->check(CLI::IsMember({"epsilon", "steps"}));
  sweep_cmd->add_option("--values", sw_values, "comma separated axis values")->required()->delimiter(',');

  std::string dc_out;
  double dc_x = 1.0, dc_y = 0.0, dc_eta = 1e-4;
  std::size_t dc_steps = 100000, dc_stride = 100;
  CLI::App* cycle_cmd = app.add_subcommand("demo-cycle", "gradient descent-ascent on f(x, y) = xy");
  cycle_cmd->add_option("--out", dc_out, "output directory")->required();
  cycle_cmd->add_option("--x0", dc_x, "start x");
  cycle_cmd->add_option("--y0", dc_y, "start y");
  cycle_cmd->add_option("--eta", dc_eta, "step size");
  cycle_cmd->add_option("--steps", dc_steps, "iterations");
  cycle_cmd->add_option("--stride", dc_stride, "CSV row stride");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(tr, out);
    if (*eval_cmd) return cmd_eval(ev, ev_ckpt, ev_attacker, ev_surrogate, out);
    if (*attack_cmd) return cmd_attack(at, at_ckpt, at_attacker, at_kind, at_steps, at_count, out);
    if (*sweep_cmd) return cmd_sweep(sw, sw_ckpt, sw_axis, sw_values, out);
    if (*cycle_cmd) return cmd_demo_cycle(dc_out, dc_x, dc_y, dc_eta, dc_steps, dc_stride, out);
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace l2l
