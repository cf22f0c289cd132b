#pragma once

#include <cstddef>
#include <ostream>
#include <utility>
#include <vector>

namespace l2l {

struct GdaTrajectory {
  std::vector<std::pair<double, double>> points;  // N + 1 entries
  double eta = 0.0;
  std::size_t steps = 0;
};

// Simultaneous descent-ascent on f(x, y) = xy:
// x <- x - eta*y, y <- y + eta*x.
GdaTrajectory gda_bilinear(std::pair<double, double> start, double eta, std::size_t steps);

// r_t = r_0 (1 + eta^2)^(t/2)
double gda_closed_form_radius(double r0, double eta, std::size_t t);

struct CycleDiagnostics {
  double min_radius = 0.0;
  double max_radius = 0.0;
  double final_radius = 0.0;
  // r_{t+1} >= r_t for every t.
  bool monotone = true;
  // Smallest distance to the origin over the trajectory (equals min_radius).
  double min_distance_to_origin = 0.0;
};

CycleDiagnostics cycle_diagnostics(const GdaTrajectory& traj);

// CSV with header t,x,y,r; every `stride`-th point plus the last one.
void write_trajectory_csv(const GdaTrajectory& traj, std::ostream& out, std::size_t stride = 1);

}  // namespace l2l
