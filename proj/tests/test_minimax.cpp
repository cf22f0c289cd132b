#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "l2l/minimax.hpp"

using namespace l2l;

TEST(Gda, OneStep) {
  const GdaTrajectory t = gda_bilinear({1.0, 0.0}, 1e-4, 1);
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_EQ(t.points[1].first, 1.0);
  EXPECT_EQ(t.points[1].second, 1e-4);
}

TEST(Gda, OriginIsFixed) {
  const GdaTrajectory t = gda_bilinear({0.0, 0.0}, 0.1, 1000);
  for (const auto& [x, y] : t.points) {
    EXPECT_EQ(x, 0.0);
    EXPECT_EQ(y, 0.0);
  }
  EXPECT_EQ(cycle_diagnostics(t).final_radius, 0.0);
}

TEST(Gda, RadiusMatchesClosedForm) {
  const double eta = 1e-4;
  const std::size_t n = 100000;
  const GdaTrajectory t = gda_bilinear({1.0, 0.0}, eta, n);
  ASSERT_EQ(t.points.size(), n + 1);
  double worst = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double r = std::hypot(t.points[i].first, t.points[i].second);
    worst = std::max(worst, std::abs(r - gda_closed_form_radius(1.0, eta, i)));
  }
  EXPECT_LT(worst, 1e-12);
  const CycleDiagnostics d = cycle_diagnostics(t);
  EXPECT_TRUE(d.monotone);
  EXPECT_GE(d.final_radius, 1.00049);
  EXPECT_LE(d.final_radius, 1.00051);
  EXPECT_EQ(d.min_radius, 1.0);
  EXPECT_EQ(d.min_distance_to_origin, d.min_radius);
  EXPECT_EQ(d.max_radius, d.final_radius);
}

TEST(Gda, NeverApproachesSaddle) {
  const GdaTrajectory t = gda_bilinear({0.3, -0.4}, 0.05, 2000);
  const CycleDiagnostics d = cycle_diagnostics(t);
  EXPECT_TRUE(d.monotone);
  EXPECT_NEAR(d.min_radius, 0.5, 1e-15);
  EXPECT_GT(d.final_radius, 0.5);
}

TEST(Gda, ClosedFormEdges) {
  EXPECT_EQ(gda_closed_form_radius(2.0, 0.3, 0), 2.0);
  EXPECT_DOUBLE_EQ(gda_closed_form_radius(1.0, 1.0, 2), 2.0);
  EXPECT_EQ(gda_bilinear({1.0, 0.0}, 0.1, 0).points.size(), 1u);
}

TEST(Gda, TrajectoryCsv) {
  const GdaTrajectory t = gda_bilinear({1.0, 0.0}, 0.1, 10);
  std::ostringstream out;
  write_trajectory_csv(t, out, 4);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,y,r");
  std::vector<std::string> ts;
  while (std::getline(in, line)) ts.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(ts, (std::vector<std::string>{"0", "4", "8", "10"}));
}
