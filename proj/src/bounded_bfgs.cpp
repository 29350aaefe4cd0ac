#include "graybox/bounded_bfgs.hpp"

#include <cmath>
#include <stdexcept>

namespace graybox {

namespace {

Vec project(const Vec& x, const Vec& lo, const Vec& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

Eigen::Array<bool, Eigen::Dynamic, 1> active_set(const Vec& x, const Vec& g, const Vec& lo, const Vec& hi) {
  Eigen::Array<bool, Eigen::Dynamic, 1> act(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) act(i) = (x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0);
  return act;
}

double projected_gradient_norm(const Vec& x, const Vec& g, const Vec& lo, const Vec& hi) {
  return (project(x - g, lo, hi) - x).cwiseAbs().maxCoeff();
}

}  // namespace

BoxBfgsResult minimize_box_bfgs(const Objective& f, Vec x0, const Vec& lower, const Vec& upper,
                                const BoxBfgsOptions& options) {
  const auto n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("minimize_box_bfgs: bound dimension mismatch");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("minimize_box_bfgs: lower bound above upper");

  BoxBfgsResult res;
  Vec x = project(x0, lower, upper);
  Vec g(n);
  double fx = f(x, g);
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.x = x;
    res.value = fx;
    res.message = "objective not finite at the starting point";
    return res;
  }
  Mat H = Mat::Identity(n, n);

  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it + 1;
    if (projected_gradient_norm(x, g, lower, upper) < options.gradient_tolerance) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      break;
    }
    const auto act = active_set(x, g, lower, upper);
    Vec gf = g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (act(i)) gf(i) = 0.0;
    Vec d = -(H * gf);
    for (Eigen::Index i = 0; i < n; ++i)
      if (act(i)) d(i) = 0.0;
    if (d.dot(gf) >= 0.0) {
      H.setIdentity();
      d = -gf;
    }

    double t = 1.0;
    bool accepted = false;
    Vec xn(n), gn(n);
    double fn = 0.0;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      xn = project(x + t * d, lower, upper);
      fn = f(xn, gn);
      if (std::isfinite(fn) && gn.allFinite() && fn <= fx + 1e-4 * g.dot(xn - x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!H.isIdentity()) {
        H.setIdentity();
        continue;
      }
      res.converged = true;
      res.message = "line search made no progress";
      break;
    }

    const Vec s = xn - x;
    const Vec y = gn - g;
    const double sy = s.dot(y);
    const double decrease = fx - fn;
    x = xn;
    g = gn;
    const double prev = fx;
    fx = fn;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Mat I = Mat::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (decrease <= options.function_tolerance * std::max(1.0, std::abs(prev))) {
      res.converged = true;
      res.message = "relative decrease below tolerance";
      break;
    }
  }
  if (!res.converged) res.message = "iteration limit reached";
  res.x = x;
  res.value = fx;
  return res;
}

}  // namespace graybox
