#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "helpers.hpp"
#include "l2l/error.hpp"
#include "l2l/gradcheck.hpp"
#include "l2l/graph.hpp"
#include "l2l/kernels.hpp"
#include "primitives.hpp"

using namespace l2l;
using l2l::testing::random_tensor;

namespace {

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct BackendGuard {
  kernels::Backend saved = kernels::active_backend();
  ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.row_size(), 3u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), Error);
  EXPECT_THROW(t.reshaped({4}), Error);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Tensor, SliceAndGatherRows) {
  Tensor t({3, 2}, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.slice_rows(1, 3).vec(), (std::vector<double>{2, 3, 4, 5}));
  std::vector<std::size_t> rows{2, 0};
  EXPECT_EQ(t.gather_rows(rows).vec(), (std::vector<double>{4, 5, 0, 1}));
}

TEST(Tensor, GradSlotMatchesData) {
  Tensor t({4});
  EXPECT_EQ(t.ensure_grad().size(), 4u);
}

TEST(Kernels, ScalarAndAvx2AgreeBitwise) {
  if (!kernels::backend_available(kernels::Backend::kAvx2)) GTEST_SKIP() << "no AVX2 on this CPU";
  const auto& s = kernels::scalar_table();
  const auto& v = kernels::avx2_table();
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.index(9), n = 1 + rng.index(13), k = 1 + rng.index(11);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), c0 = random_tensor({m, n}, rng);
    std::vector<double> cs = c0.vec(), cv = c0.vec();
    s.gemm_acc(m, n, k, a.data().data(), b.data().data(), cs.data());
    v.gemm_acc(m, n, k, a.data().data(), b.data().data(), cv.data());
    ASSERT_TRUE(bitwise_equal(cs, cv)) << "gemm " << m << "x" << n << "x" << k;

    const std::size_t len = 1 + rng.index(37);
    Tensor x = random_tensor({len}, rng), y = random_tensor({len}, rng);
    const double alpha = rng.uniform(-2, 2);
    std::vector<double> ys = y.vec(), yv = y.vec();
    s.axpy(len, alpha, x.data().data(), ys.data());
    v.axpy(len, alpha, x.data().data(), yv.data());
    ASSERT_TRUE(bitwise_equal(ys, yv));

    std::vector<double> os(len), ov(len);
    s.mul(len, x.data().data(), y.data().data(), os.data());
    v.mul(len, x.data().data(), y.data().data(), ov.data());
    ASSERT_TRUE(bitwise_equal(os, ov));

    s.relu(len, x.data().data(), os.data());
    v.relu(len, x.data().data(), ov.data());
    ASSERT_TRUE(bitwise_equal(os, ov));

    std::vector<double> ds = y.vec(), dv = y.vec();
    s.relu_backward(len, x.data().data(), y.data().data(), ds.data());
    v.relu_backward(len, x.data().data(), y.data().data(), dv.data());
    ASSERT_TRUE(bitwise_equal(ds, dv));

    std::vector<double> zs = x.vec(), zv = x.vec();
    s.clamp(len, -0.3, 0.4, zs.data());
    v.clamp(len, -0.3, 0.4, zv.data());
    ASSERT_TRUE(bitwise_equal(zs, zv));
  }
}

TEST(Kernels, BackendSelection) {
  BackendGuard guard;
  kernels::set_backend(kernels::Backend::kScalar);
  EXPECT_EQ(kernels::active_backend(), kernels::Backend::kScalar);
  EXPECT_EQ(kernels::backend_name(kernels::Backend::kAvx2), "avx2");
}

TEST(Kernels, WholeGraphIdenticalAcrossBackends) {
  if (!kernels::backend_available(kernels::Backend::kAvx2)) GTEST_SKIP();
  BackendGuard guard;
  Rng rng(5);
  Tensor x = random_tensor({2, 2, 5, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  auto run = [&] {
    Graph g;
    Var xi = g.input(x);
    Var y = g.relu(g.conv2d(xi, g.constant(w), g.constant(b), 2, 1));
    g.backward(g.sum(g.mul(y, y)));
    auto out = g.value(y).vec();
    auto gx = g.grad(xi);
    out.insert(out.end(), gx.begin(), gx.end());
    return out;
  };
  kernels::set_backend(kernels::Backend::kScalar);
  const auto a = run();
  kernels::set_backend(kernels::Backend::kAvx2);
  EXPECT_TRUE(bitwise_equal(a, run()));
}

TEST(Graph, TanhAtZero) {
  Graph g;
  Var x = g.input(Tensor({1}, 0.0));
  Var y = g.tanh(x);
  EXPECT_EQ(g.value(y)[0], 0.0);
  g.backward(g.sum(y));
  EXPECT_DOUBLE_EQ(g.grad(x)[0], 1.0);
}

TEST(Graph, CrossEntropyUniformLogits) {
  for (std::size_t c : {2u, 3u, 10u}) {
    Graph g;
    Tensor targets({1, c});
    targets[0] = 1.0;
    Var loss = g.softmax_cross_entropy(g.constant(Tensor({1, c}, 0.3)), g.constant(targets));
    EXPECT_NEAR(g.value(loss)[0], std::log(static_cast<double>(c)), 1e-15);
  }
}

TEST(Graph, CrossEntropyGradientIsSoftmaxMinusOneHot) {
  Graph g;
  Var z = g.input(Tensor({1, 2}, 0.0));
  Tensor y({1, 2});
  y[0] = 1.0;
  g.backward(g.sum(g.softmax_cross_entropy(z, g.constant(y))));
  const auto gz = g.grad(z);
  EXPECT_DOUBLE_EQ(gz[0], -0.5);
  EXPECT_DOUBLE_EQ(gz[1], 0.5);
}

TEST(Graph, DenseZeroWeightsGivesBias) {
  Graph g;
  Tensor b({3}, std::vector<double>{1, -2, 0.5});
  Rng rng(1);
  Var y = g.dense(g.constant(random_tensor({4, 2}, rng)), g.constant(Tensor({2, 3})), g.constant(b));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(g.value(y)[i * 3 + j], b[j]);
}

TEST(Graph, SignOfZeroIsZero) {
  Graph g;
  Var y = g.sign(g.constant(Tensor({3}, std::vector<double>{-2, 0, 3})));
  EXPECT_EQ(g.value(y).vec(), (std::vector<double>{-1, 0, 1}));
}

TEST(Graph, ClampBoundaryCountsAsInside) {
  Graph g;
  Var x = g.input(Tensor({4}, std::vector<double>{-1, -0.5, 0.5, 1}));
  g.backward(g.sum(g.clamp(x, -0.5, 0.5)));
  EXPECT_EQ(g.grad(x), (std::vector<double>{0, 1, 1, 0}));
}

TEST(Graph, NonScalarLossRejected) {
  Graph g;
  Var x = g.input(Tensor({2}, 1.0));
  EXPECT_THROW(g.backward(x), Error);
}

TEST(Graph, ShapeMismatchNamesTheOp) {
  Graph g;
  try {
    g.add(g.constant(Tensor({2})), g.constant(Tensor({3})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
  }
}

TEST(Graph, EvaluateIsDeterministic) {
  Rng rng(3);
  Tensor x = random_tensor({2, 1, 4, 4}, rng), w = random_tensor({2, 1, 3, 3}, rng);
  auto run = [&] {
    Graph g;
    return g.value(g.tanh(g.conv2d(g.constant(x), g.constant(w), g.constant(Tensor({2})), 1, 1))).vec();
  };
  EXPECT_TRUE(bitwise_equal(run(), run()));
}

TEST(Graph, BatchNormEvalIndependentOfBatch) {
  BatchNormStats st{Tensor({2}, std::vector<double>{0.1, -0.2}), Tensor({2}, std::vector<double>{1.5, 0.7})};
  Rng rng(4);
  Tensor x = random_tensor({3, 2}, rng);
  Graph g;
  Var gamma = g.constant(Tensor({2}, 1.2)), beta = g.constant(Tensor({2}, 0.1));
  Var full = g.batch_norm(g.constant(x), gamma, beta, &st, false);
  Var one = g.batch_norm(g.constant(x.slice_rows(1, 2)), gamma, beta, &st, false);
  EXPECT_EQ(g.value(full)[2], g.value(one)[0]);
  EXPECT_EQ(g.value(full)[3], g.value(one)[1]);
}

TEST(Graph, BatchNormRunningStatistics) {
  BatchNormStats st{Tensor({1}, 0.0), Tensor({1}, 1.0)};
  Graph g;
  g.batch_norm(g.constant(Tensor({2, 1}, std::vector<double>{1, 3})), g.constant(Tensor({1}, 1.0)),
               g.constant(Tensor({1}, 0.0)), &st, true);
  EXPECT_DOUBLE_EQ(st.running_mean[0], 0.2);
  // unbiased batch variance 2: 0.9 * 1 + 0.1 * 2
  EXPECT_DOUBLE_EQ(st.running_var[0], 1.1);
}

TEST(Graph, ConcatGradientSplitsExactly) {
  Rng rng(6);
  Tensor a = random_tensor({2, 1, 2, 2}, rng), b = random_tensor({2, 2, 2, 2}, rng);
  Tensor w = random_tensor({2, 3, 2, 2}, rng);
  Graph g;
  Var va = g.input(a), vb = g.input(b);
  g.backward(project_to_scalar(g, g.concat_channels({va, vb}), w));
  const auto ga = g.grad(va), gb = g.grad(vb);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t s = 0; s < 4; ++s) {
        const double whole = w[(n * 3 + c) * 4 + s];
        const double part = c == 0 ? ga[n * 4 + s] : gb[(n * 2 + c - 1) * 4 + s];
        EXPECT_EQ(whole, part);
      }
}

TEST(Graph, CosineSimilarityClosedForms) {
  Graph g;
  Var a = g.constant(Tensor({3, 2}, std::vector<double>{1, 1, 1, 0, 2, 3}));
  Var b = g.constant(Tensor({3, 2}, std::vector<double>{1, 0, 0, 1, 2, 3}));
  const Tensor& q = g.value(g.cosine_similarity(a, b));
  EXPECT_NEAR(q[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(q[1], 0.0);
  EXPECT_NEAR(q[2], 1.0, 1e-15);
}

TEST(Graph, CosineZeroNormIsZeroWithWarning) {
  Graph g;
  Var q = g.cosine_similarity(g.constant(Tensor({1, 2})), g.constant(Tensor({1, 2}, 1.0)));
  EXPECT_EQ(g.value(q)[0], 0.0);
  EXPECT_EQ(g.zero_norm_warnings(), 1u);
}

TEST(Graph, MarginLossTruncation) {
  Graph g;
  Tensor y({1, 3});
  y[0] = 1.0;
  Var z = g.constant(Tensor({1, 3}, std::vector<double>{0.5, 2.0, 1.0}));
  EXPECT_DOUBLE_EQ(g.value(g.margin_loss(z, g.constant(y), 100.0))[0], 1.5);
  EXPECT_DOUBLE_EQ(g.value(g.margin_loss(z, g.constant(y), 0.0))[0], 0.0);
}

TEST(GradCheck, DenseBelow1e6) {
  Rng rng(21);
  Tensor w = random_tensor({3, 2}, rng);
  auto f = [&](Graph& g, std::span<const Var> v) { return project_to_scalar(g, g.dense(v[0], v[1], v[2]), w); };
  const auto r = finite_difference_check(f, {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)}, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, TanhAtHalfBelow1e8) {
  auto f = [](Graph& g, std::span<const Var> v) { return g.sum(g.tanh(v[0])); };
  EXPECT_LT(finite_difference_check(f, {Tensor({1}, 0.5)}, 1e-5).max_rel_error, 1e-8);
}

TEST(GradCheck, BatchNormTrainBelow1e4) {
  Rng rng(22);
  Tensor w = random_tensor({4, 3}, rng);
  auto f = [&](Graph& g, std::span<const Var> v) {
    return project_to_scalar(g, g.batch_norm(v[0], v[1], v[2], nullptr, true), w);
  };
  const auto r = finite_difference_check(f, {random_tensor({4, 3}, rng), random_tensor({3}, rng, 0.5, 1.5), random_tensor({3}, rng)}, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradCheck, ConvAtRandomPoint) {
  Rng rng(23);
  Tensor w = random_tensor({1, 2, 3, 3}, rng);
  auto f = [&](Graph& g, std::span<const Var> v) {
    return project_to_scalar(g, g.conv2d(v[0], v[1], v[2], 2, 1), w);
  };
  const auto r = finite_difference_check(f, {random_tensor({1, 3, 5, 6}, rng), random_tensor({2, 3, 3, 3}, rng), random_tensor({2}, rng)}, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradCheck, EveryPrimitiveTenPoints) {
  Rng rng(24);
  for (const auto& prim : l2l::testing::primitive_catalogue()) {
    for (int i = 0; i < 10; ++i) {
      auto c = prim.make(rng);
      const auto r = finite_difference_check(c.builder, c.point, 1e-5);
      EXPECT_LT(r.max_rel_error, 1e-4) << prim.name << " point " << i;
    }
  }
}
