#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"
#include "l2l/data_io.hpp"
#include "l2l/error.hpp"
#include "l2l/eval.hpp"
#include "l2l/training.hpp"

using namespace l2l;
using l2l::testing::random_tensor;

namespace {

Dataset unit_moons(std::size_t n, std::uint64_t seed) {
  const Dataset raw = synth_dataset(SynthKind::kTwoMoons, n, 0.1, seed);
  return apply_unit_box(raw, fit_unit_box(raw, 0.1));
}

ClassifierNet trained_net(const Dataset& d, std::uint64_t seed, TrainMode mode = TrainMode::kPlain) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 15;
  c.batch_size = 32;
  c.epsilon = 0.03;
  c.eta = 0.01;
  c.init_radius = 0.001;
  c.steps = 5;
  c.seed = seed;
  return train(c, ArchSpec::mlp(2, {32, 32}, 2), d).net;
}

AttackSpec pgm_spec(double eps, std::size_t steps = 20) {
  AttackSpec s;
  s.epsilon = eps;
  s.eta = eps / 8;
  s.steps = steps;
  s.init_radius = eps / 10;
  s.domain = Domain{};
  return s;
}

// Logits fixed at `bias` whatever the input.
ClassifierNet constant_net(std::vector<double> bias) {
  ClassifierNet net = build_classifier(ArchSpec::mlp(2, {4}, bias.size()), 0);
  auto p = net.parameters().flat();
  std::fill(p.begin(), p.end(), 0.0);
  net.parameters().set_flat(p);
  ParameterSet& ps = net.parameters();
  ps.param(ps.tensor_count() - 1).vec() = bias;
  return net;
}

EvalReport report_with(std::map<std::string, double> acc, std::uint64_t seed) {
  EvalReport r;
  r.clean_accuracy = 0.9;
  r.robust_accuracy = std::move(acc);
  r.seeds = {seed};
  return r;
}

}  // namespace

TEST(RobustAccuracy, ConstantNetOnItsClass) {
  const ClassifierNet net = constant_net({0.0, 1.0});
  Dataset d = unit_moons(20, 1);
  d = d.subset(std::vector<std::size_t>{10, 11, 12, 13, 14});  // class 1 rows
  for (std::size_t i = 0; i < d.size(); ++i) ASSERT_EQ(d.labels[i * 2 + 1], 1.0);
  for (AttackKind k : {AttackKind::kFgsm, AttackKind::kPgm, AttackKind::kCw, AttackKind::kRandom}) {
    AttackSpec s = pgm_spec(0.5);
    s.kind = k;
    s.samples = 30;
    EXPECT_EQ(robust_accuracy(net, d, s, 0), 1.0);
  }
}

TEST(RobustAccuracy, ZeroEpsilonIsClean) {
  const Dataset d = unit_moons(60, 2);
  const ClassifierNet net = trained_net(d, 1);
  for (AttackKind k : {AttackKind::kFgsm, AttackKind::kPgm, AttackKind::kCw, AttackKind::kRandom}) {
    AttackSpec s = pgm_spec(0.0);
    s.kind = k;
    s.eta = 0.01;
    s.init_radius = 0.0;
    EXPECT_EQ(robust_accuracy(net, d, s, 3), clean_accuracy(net, d));
  }
}

TEST(RobustAccuracy, EmptyDatasetRejected) {
  const ClassifierNet net = constant_net({0.0, 1.0});
  Dataset d = unit_moons(10, 1).head(0);
  EXPECT_THROW(clean_accuracy(net, d), Error);
  EXPECT_THROW(robust_accuracy(net, d, pgm_spec(0.1), 0), Error);
}

TEST(RobustAccuracy, PgmFindingsAreGenuineAgainstGrid) {
  const Dataset train_set = unit_moons(100, 3);
  const ClassifierNet net = trained_net(train_set, 2);
  const Dataset d = unit_moons(8, 9);
  const double eps = 0.08;
  const AttackSpec s = pgm_spec(eps);
  const Tensor xa = pgm(net, d.inputs, d.labels, s, 0);
  const auto pa = predict(classify(net, xa));
  const auto y = d.label_indices();
  std::size_t grid_robust = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    if (pa[i] != y[i]) {
      EXPECT_LE(std::max(std::abs(xa[2 * i] - d.inputs[2 * i]), std::abs(xa[2 * i + 1] - d.inputs[2 * i + 1])), eps + 1e-12);
    }
    const int m = 40;
    Tensor grid({(m + 1) * (m + 1), 2});
    for (int a = 0; a <= m; ++a)
      for (int b = 0; b <= m; ++b) {
        const std::size_t k = a * (m + 1) + b;
        grid[2 * k] = std::clamp(d.inputs[2 * i] + eps * (2.0 * a / m - 1.0), 0.0, 1.0);
        grid[2 * k + 1] = std::clamp(d.inputs[2 * i + 1] + eps * (2.0 * b / m - 1.0), 0.0, 1.0);
      }
    const auto pg = predict(classify(net, grid));
    grid_robust += std::all_of(pg.begin(), pg.end(), [&](std::size_t p) { return p == y[i]; });
  }
  const double grid_acc = static_cast<double>(grid_robust) / 8.0;
  EXPECT_GE(robust_accuracy(net, d, s, 0), grid_acc);
}

TEST(RobustAccuracy, ParallelMatchesSerial) {
  const Dataset d = unit_moons(150, 4);
  const ClassifierNet net = trained_net(d, 3);
  AttackSpec s = pgm_spec(0.05);
  const EvalOptions serial{1, 16}, parallel{3, 16}, big{1, 64};
  EXPECT_EQ(robust_accuracy(net, d, s, 5, serial), robust_accuracy(net, d, s, 5, parallel));
  EXPECT_EQ(robust_accuracy(net, d, s, 5, serial), robust_accuracy(net, d, s, 5, big));
  s.kind = AttackKind::kRandom;
  s.samples = 40;
  EXPECT_EQ(robust_accuracy(net, d, s, 5, serial), robust_accuracy(net, d, s, 5, parallel));
}

TEST(RobustAccuracy, ZeroHeadAttackerIsClean) {
  const Dataset d = unit_moons(40, 5);
  const ClassifierNet net = trained_net(d, 4);
  AttackerNet a = build_attacker(AttackerVariant::kGrad, 0.05, {2}, 0.05, 1);
  a.zero_output_layer();
  EXPECT_EQ(robust_accuracy(net, d, a), clean_accuracy(net, d));
}

TEST(WorstOfK, Minimum) {
  std::vector<EvalReport> rs{report_with({{"PGM-20", 0.51}}, 1), report_with({{"PGM-20", 0.49}}, 2),
                             report_with({{"PGM-20", 0.50}}, 3)};
  const EvalReport w = worst_of_k(rs);
  EXPECT_EQ(w.robust_accuracy.at("PGM-20"), 0.49);
  EXPECT_EQ(w.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  std::reverse(rs.begin(), rs.end());
  EXPECT_EQ(worst_of_k(rs).robust_accuracy, w.robust_accuracy);
  for (const auto& r : rs) EXPECT_LE(w.robust_accuracy.at("PGM-20"), r.robust_accuracy.at("PGM-20"));
}

TEST(WorstOfK, SingleIsIdentity) {
  const std::vector<EvalReport> rs{report_with({{"FGSM", 0.7}, {"PGM-20", 0.6}}, 4)};
  const EvalReport w = worst_of_k(rs);
  EXPECT_EQ(w.robust_accuracy, rs[0].robust_accuracy);
  EXPECT_EQ(w.clean_accuracy, rs[0].clean_accuracy);
  EXPECT_EQ(w.seeds, rs[0].seeds);
}

TEST(WorstOfK, MismatchedAttacksRejected) {
  const std::vector<EvalReport> rs{report_with({{"FGSM", 0.7}}, 1), report_with({{"PGM-20", 0.6}}, 2)};
  EXPECT_THROW(worst_of_k(rs), Error);
  EXPECT_THROW(worst_of_k(std::vector<EvalReport>{}), Error);
}

TEST(Sweep, EpsilonAxisStartsAtClean) {
  const Dataset d = unit_moons(60, 6);
  const ClassifierNet net = trained_net(d, 5);
  const std::vector<double> eps{0.0, 0.05, 0.1};
  const Curve c = sweep(net, d, SweepAxis::kEpsilon, eps, pgm_spec(0.031), 1);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_EQ(c.axis, "epsilon");
  EXPECT_EQ(c.points[0].second, clean_accuracy(net, d));
  const AttackSpec s = epsilon_sweep_spec(0.1, pgm_spec(0.031));
  EXPECT_EQ(s.steps, 10u);
  EXPECT_DOUBLE_EQ(s.eta, 0.01);
}

TEST(Sweep, AxisValidation) {
  const Dataset d = unit_moons(20, 7);
  const ClassifierNet net = trained_net(d, 6);
  EXPECT_THROW(sweep(net, d, SweepAxis::kEpsilon, std::vector<double>{}, pgm_spec(0.1), 0), Error);
  EXPECT_THROW(sweep(net, d, SweepAxis::kSteps, std::vector<double>{5, 5}, pgm_spec(0.1), 0), Error);
  const Curve c = sweep(net, d, SweepAxis::kSteps, std::vector<double>{1, 5, 10}, pgm_spec(0.1), 0);
  EXPECT_EQ(c.axis, "steps");
}

TEST(Transfer, SelfSurrogateIsWhiteBox) {
  const Dataset d = unit_moons(60, 8);
  const ClassifierNet net = trained_net(d, 7);
  const AttackSpec s = pgm_spec(0.08);
  const TransferResult r = blackbox_transfer_eval(net, net, d, s, 9);
  EXPECT_EQ(r.robust_accuracy, robust_accuracy(net, d, s, 9));
  EXPECT_FALSE(r.arch_mismatch);
  AttackSpec z = s;
  z.epsilon = 0.0;
  z.init_radius = 0.0;
  const ClassifierNet other = trained_net(d, 8);
  EXPECT_EQ(blackbox_transfer_eval(net, other, d, z, 9).robust_accuracy, clean_accuracy(net, d));
}

TEST(Transfer, ArchitectureMismatchFlagged) {
  const Dataset d = unit_moons(40, 9);
  const ClassifierNet a = trained_net(d, 1);
  TrainConfig c;
  c.epochs = 2;
  const ClassifierNet b = train(c, ArchSpec::mlp(2, {8}, 2), d).net;
  EXPECT_TRUE(blackbox_transfer_eval(a, b, d, pgm_spec(0.05), 0).arch_mismatch);
}

TEST(Checklist, ConstantNetFailsUnboundedItem) {
  const ClassifierNet net = constant_net({0.0, 1.0});
  const Dataset d = unit_moons(40, 10);
  ChecklistConfig cc;
  cc.base = pgm_spec(0.05);
  cc.random_samples = 50;
  cc.long_steps = 30;
  const auto items = sanity_checklist(net, d, cc, nullptr);
  ASSERT_EQ(items.size(), 5u);
  const auto it = std::find_if(items.begin(), items.end(),
                               [](const ChecklistItem& i) { return i.name == "unbounded_attack_saturates"; });
  ASSERT_NE(it, items.end());
  EXPECT_FALSE(it->passed);
  EXPECT_FALSE(it->skipped);
  const auto bb = std::find_if(items.begin(), items.end(),
                               [](const ChecklistItem& i) { return i.name == "blackbox_weaker_than_whitebox"; });
  EXPECT_TRUE(bb->skipped);
  EXPECT_FALSE(bb->passed);
}

TEST(Checklist, RobustDeskNetPassesAllFive) {
  const Dataset train_set = unit_moons(200, 11);
  const Dataset test_set = unit_moons(100, 12);
  const ClassifierNet net = trained_net(train_set, 1, TrainMode::kDroPgm);
  const ClassifierNet surrogate = trained_net(train_set, 2, TrainMode::kDroPgm);
  ChecklistConfig cc;
  cc.base = pgm_spec(0.03);
  cc.sweep_epsilons = {0.0, 0.01, 0.02, 0.03, 0.05, 0.1};
  const auto items = sanity_checklist(net, test_set, cc, &surrogate);
  ASSERT_EQ(items.size(), 5u);
  for (const auto& i : items) EXPECT_TRUE(i.passed) << i.name << " " << i.note;
}

TEST(Report, ValidateRejectsBadAccuracy) {
  EvalReport r = report_with({{"PGM-20", 1.5}}, 0);
  EXPECT_THROW(r.validate(), Error);
  r.robust_accuracy["PGM-20"] = 0.5;
  r.curves["epsilon"] = Curve{"epsilon", {{0.1, 0.5}, {0.05, 0.6}}};
  EXPECT_THROW(r.validate(), Error);
}
