#pragma once

// Independent reference implementations used only by the tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/linalg.hpp"
#include "graybox/timeseries.hpp"

namespace oracle {

using graybox::Mat;
using graybox::Vec;

/// exp(A) by scaling and squaring around a truncated Taylor series.
inline Mat series_expm(const Mat& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const Mat scaled = a / std::pow(2.0, squarings);
  Mat term = Mat::Identity(a.rows(), a.cols());
  Mat sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// int_0^dt exp(A s) ds * B as the series sum_k A^k dt^(k+1) / (k+1)! B.
inline Mat series_input_map(const Mat& a, const Mat& b, double dt) {
  Mat power = Mat::Identity(a.rows(), a.cols());
  Mat sum = Mat::Zero(a.rows(), a.cols());
  double coeff = dt;
  for (int k = 0; k < 60; ++k) {
    sum += coeff * power;
    power = power * a;
    coeff *= dt / static_cast<double>(k + 2);
  }
  return sum * b;
}

/// Continuous-time state matrix [[0, I], [-M^-1 K, -M^-1 C]] of the linear part.
inline Mat state_matrix(const graybox::SystemModel& m) {
  const auto n = static_cast<Eigen::Index>(m.n_dof());
  const Mat minv = m.mass.inverse();
  Mat a = Mat::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n) = Mat::Identity(n, n);
  a.bottomLeftCorner(n, n) = -minv * m.effective_stiffness();
  a.bottomRightCorner(n, n) = -minv * m.damping;
  return a;
}

inline Mat input_matrix(const graybox::SystemModel& m) {
  const auto n = static_cast<Eigen::Index>(m.n_dof());
  Mat b = Mat::Zero(2 * n, n);
  b.bottomRows(n) = m.mass.inverse();
  return b;
}

/// Classical RK4 on the deterministic equations of motion, `refine` steps
/// per sample, forcing linear between samples. Rows are flattened states.
inline Mat rk4_reference(const graybox::SystemModel& model, const graybox::TimeSeries& forcing, int refine,
                         const Vec& y0) {
  const std::size_t count = forcing.length();
  const double h = forcing.dt() / refine;
  Mat out(static_cast<Eigen::Index>(count), y0.size());
  Vec y = y0;
  for (std::size_t k = 0; k < count; ++k) {
    out.row(static_cast<Eigen::Index>(k)) = y.transpose();
    if (k + 1 == count) break;
    const Vec f0 = forcing.sample(k);
    const Vec f1 = forcing.sample(k + 1);
    for (int s = 0; s < refine; ++s) {
      const double a = static_cast<double>(s) / refine;
      const double b = static_cast<double>(s + 1) / refine;
      const Vec fa = f0 + a * (f1 - f0);
      const Vec fm = f0 + 0.5 * (a + b) * (f1 - f0);
      const Vec fb = f0 + b * (f1 - f0);
      const Vec k1 = graybox::eval_rhs_flat(model, y, fa);
      const Vec k2 = graybox::eval_rhs_flat(model, y + 0.5 * h * k1, fm);
      const Vec k3 = graybox::eval_rhs_flat(model, y + 0.5 * h * k2, fm);
      const Vec k4 = graybox::eval_rhs_flat(model, y + h * k3, fb);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return out;
}

/// Squared-exponential kernel written out directly.
inline double se_kernel(const Vec& a, const Vec& b, double s2, const Vec& l) {
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) r2 += (a(d) - b(d)) * (a(d) - b(d)) / (l(d) * l(d));
  return s2 * std::exp(-0.5 * r2);
}

/// Dense GP posterior through an explicit matrix inverse.
struct DensePosterior {
  Vec mean;
  Mat cov;
};

inline DensePosterior dense_gp(const Mat& x, const Vec& y, const Mat& q, double s2, const Vec& l, double noise,
                               double prior_mean) {
  const auto n = x.rows();
  const auto m = q.rows();
  Mat kxx(n, n), kqx(m, n), kqq(m, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kxx(i, j) = se_kernel(x.row(i), x.row(j), s2, l) + (i == j ? noise : 0.0);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kqx(i, j) = se_kernel(q.row(i), x.row(j), s2, l);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) kqq(i, j) = se_kernel(q.row(i), q.row(j), s2, l);
  const Mat inv = kxx.inverse();
  DensePosterior p;
  p.mean = Vec::Constant(m, prior_mean) + kqx * inv * (y.array() - prior_mean).matrix();
  p.cov = kqq - kqx * inv * kqx.transpose();
  return p;
}

/// Power at each rfft bin by direct DFT sums.
inline std::vector<double> dft_power(const Vec& x) {
  const auto n = x.size();
  std::vector<double> power(static_cast<std::size_t>(n / 2 + 1));
  for (Eigen::Index k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t)
      acc += x(t) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
    power[static_cast<std::size_t>(k)] = std::norm(acc);
  }
  return power;
}

}  // namespace oracle
