#include "l2l/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "l2l/error.hpp"

namespace l2l {
namespace {

double evaluate(const ScalarBuilder& f, const std::vector<Tensor>& point) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(point.size());
  for (const Tensor& t : point) vars.push_back(g.constant(t));
  return g.value(f(g, vars)).item();
}

}  // namespace

GradCheckResult finite_difference_check(const ScalarBuilder& f, const std::vector<Tensor>& point,
                                        double h) {
  if (!(h > 0.0)) throw Error("finite_difference_check: h must be positive");

  Graph g;
  std::vector<Var> vars;
  for (const Tensor& t : point) vars.push_back(g.input(t));
  g.backward(f(g, vars));

  GradCheckResult res;
  std::vector<Tensor> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    const std::vector<double> analytic = g.grad(vars[k]);
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double x0 = point[k][i];
      probe[k][i] = x0 + h;
      const double up = evaluate(f, probe);
      probe[k][i] = x0 - h;
      const double down = evaluate(f, probe);
      probe[k][i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double err =
          std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-8);
      if (err > res.max_rel_error) res = {err, k, i};
    }
  }
  return res;
}

Var project_to_scalar(Graph& g, Var out, const Tensor& weights) {
  const Tensor& v = g.value(out);
  if (v.size() != weights.size()) throw Error("project_to_scalar: weight count mismatch");
  return g.sum(g.mul(out, g.constant(weights.reshaped(v.shape()))));
}

}  // namespace l2l
