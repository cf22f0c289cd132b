#include "l2l/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "l2l/error.hpp"

namespace l2l {

GdaTrajectory gda_bilinear(std::pair<double, double> start, double eta, std::size_t steps) {
  if (!(eta > 0.0)) throw Error("gda_bilinear: eta must be > 0");
  GdaTrajectory t;
  t.eta = eta;
  t.steps = steps;
  t.points.reserve(steps + 1);
  t.points.push_back(start);
  auto [x, y] = start;
  for (std::size_t i = 0; i < steps; ++i) {
    const double nx = x - eta * y;
    const double ny = y + eta * x;
    x = nx;
    y = ny;
    t.points.emplace_back(x, y);
  }
  return t;
}

double gda_closed_form_radius(double r0, double eta, std::size_t t) {
  // 1 + eta^2 rounds away most of eta^2 when eta is small; log1p keeps it.
  return r0 * std::exp(0.5 * static_cast<double>(t) * std::log1p(eta * eta));
}

CycleDiagnostics cycle_diagnostics(const GdaTrajectory& traj) {
  if (traj.points.empty()) throw Error("cycle_diagnostics: empty trajectory");
  CycleDiagnostics d;
  double prev = 0.0;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const double r = std::hypot(traj.points[i].first, traj.points[i].second);
    if (i == 0) {
      d.min_radius = d.max_radius = r;
    } else {
      d.min_radius = std::min(d.min_radius, r);
      d.max_radius = std::max(d.max_radius, r);
      if (r < prev) d.monotone = false;
    }
    prev = r;
  }
  d.final_radius = prev;
  d.min_distance_to_origin = d.min_radius;
  return d;
}

void write_trajectory_csv(const GdaTrajectory& traj, std::ostream& out, std::size_t stride) {
  stride = std::max<std::size_t>(1, stride);
  out << "t,x,y,r\n";
  char buf[160];
  const std::size_t last = traj.points.empty() ? 0 : traj.points.size() - 1;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    if (i % stride != 0 && i != last) continue;
    const auto [x, y] = traj.points[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, x, y, std::hypot(x, y));
    out << buf;
  }
}

}  // namespace l2l
