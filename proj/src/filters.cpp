#include "graybox/filters.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace graybox {

namespace {

Mat state_noise(std::size_t dim, const FilterNoiseConfig& cfg) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (cfg.q_state.size() == 0) return Mat::Identity(d, d) * cfg.q_state_default;
  if (cfg.q_state.size() != d) throw std::invalid_argument("filter.q_state must have " + std::to_string(dim) + " entries");
  return cfg.q_state.asDiagonal();
}

Mat measurement_noise(std::size_t rows, const FilterNoiseConfig& cfg) {
  const auto m = static_cast<Eigen::Index>(rows);
  if (cfg.r_std.size() == 1) return Mat::Identity(m, m) * (cfg.r_std(0) * cfg.r_std(0));
  if (cfg.r_std.size() != m)
    throw std::invalid_argument("filter: need " + std::to_string(rows) + " measurement noise stds, got " +
                                std::to_string(cfg.r_std.size()));
  return cfg.r_std.array().square().matrix().asDiagonal();
}

Mat mass_inverse(const SystemModel& model) {
  Eigen::LLT<Mat> llt(model.mass);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("filter model: mass matrix is not positive definite");
  return llt.solve(Mat::Identity(model.mass.rows(), model.mass.cols()));
}

void check_psd(const Mat& p, std::size_t step, const char* what) {
  if (!p.allFinite()) throw FilterError(std::string(what) + " is not finite", step);
}

Mat input_matrix(const TimeSeries& known_input, std::size_t n, std::size_t count) {
  if (known_input.length() != count) throw std::invalid_argument("filter: known input and measurements differ in length");
  if (known_input.channels() == n) return known_input.values();
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label("force", i));
  return known_input.select(labels).values();
}

}  // namespace

FilterInit FilterInit::defaults(std::size_t state_dim, std::size_t force_dim, const FilterNoiseConfig& cfg) {
  const auto s = static_cast<Eigen::Index>(state_dim);
  const auto f = static_cast<Eigen::Index>(force_dim);
  Vec mean = Vec::Zero(s);
  if (cfg.init_state_mean.size() != 0) {
    if (cfg.init_state_mean.size() != s) throw std::invalid_argument("filter init: state mean has the wrong length");
    mean = cfg.init_state_mean;
  }
  return FilterInit{mean, Mat::Identity(s, s) * cfg.init_state_var, Vec::Zero(f),
                    Mat::Identity(f, f) * cfg.init_force_var};
}

UtWeights compute_ut_weights(std::size_t L, double alpha, double beta, double kappa) {
  if (L == 0) throw std::invalid_argument("compute_ut_weights: L must be >= 1");
  if (alpha == 0.0) throw std::invalid_argument("compute_ut_weights: alpha must be nonzero");
  const double l = static_cast<double>(L);
  const double lambda = alpha * alpha * (l + kappa) - l;
  if (l + lambda == 0.0) throw std::invalid_argument("compute_ut_weights: degenerate scaling, L + lambda = 0");
  UtWeights w;
  w.L = L;
  w.lambda = lambda;
  const auto count = static_cast<Eigen::Index>(2 * L + 1);
  w.w_mean = Vec::Constant(count, 1.0 / (2.0 * (l + lambda)));
  w.w_cov = w.w_mean;
  w.w_mean(0) = lambda / (l + lambda);
  w.w_cov(0) = lambda / (l + lambda) + (1.0 - alpha * alpha + beta);
  return w;
}

TimeSeries EstimateSeries::means() const {
  if (state_mean.empty()) throw std::invalid_argument("EstimateSeries is empty");
  const auto ns = state_mean.front().size();
  const auto nf = force_mean.front().size();
  const auto n = ns / 2;
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < n; ++i) labels.push_back(channel_label("disp", static_cast<std::size_t>(i)));
  for (Eigen::Index i = 0; i < n; ++i) labels.push_back(channel_label("vel", static_cast<std::size_t>(i)));
  for (Eigen::Index i = 0; i < nf; ++i) labels.push_back(channel_label("res", static_cast<std::size_t>(i)));
  Mat values(static_cast<Eigen::Index>(length()), 2 * n + nf);
  for (std::size_t k = 0; k < length(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    values.row(r).head(2 * n) = state_mean[k].head(2 * n).transpose();
    values.row(r).tail(nf) = force_mean[k].transpose();
  }
  return TimeSeries(dt, std::move(labels), std::move(values));
}

TimeSeries EstimateSeries::variances() const {
  if (state_cov.empty()) throw std::invalid_argument("EstimateSeries is empty");
  const auto ns = state_cov.front().rows();
  const auto nf = force_cov.front().rows();
  const auto n = ns / 2;
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < n; ++i) labels.push_back(channel_label("var_disp", static_cast<std::size_t>(i)));
  for (Eigen::Index i = 0; i < n; ++i) labels.push_back(channel_label("var_vel", static_cast<std::size_t>(i)));
  for (Eigen::Index i = 0; i < nf; ++i) labels.push_back(channel_label("var_res", static_cast<std::size_t>(i)));
  Mat values(static_cast<Eigen::Index>(length()), 2 * n + nf);
  for (std::size_t k = 0; k < length(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    values.row(r).head(2 * n) = state_cov[k].diagonal().head(2 * n).transpose();
    values.row(r).tail(nf) = force_cov[k].diagonal().transpose();
  }
  return TimeSeries(dt, std::move(labels), std::move(values));
}

EstimateSeries EstimateSeries::from_tables(const TimeSeries& means, const TimeSeries& variances) {
  if (means.length() != variances.length()) throw std::invalid_argument("estimate tables differ in length");
  std::size_t n = 0;
  while (means.has_channel(channel_label("disp", n))) ++n;
  std::size_t nf = 0;
  while (means.has_channel(channel_label("res", nf))) ++nf;
  if (n == 0 || nf == 0) throw std::invalid_argument("estimate table lacks disp_/res_ channels");
  std::vector<std::string> state_labels, force_labels, state_var_labels, force_var_labels;
  for (const char* p : {"disp", "vel"})
    for (std::size_t i = 0; i < n; ++i) {
      state_labels.push_back(channel_label(p, i));
      state_var_labels.push_back(channel_label(std::string("var_") + p, i));
    }
  for (std::size_t i = 0; i < nf; ++i) {
    force_labels.push_back(channel_label("res", i));
    force_var_labels.push_back(channel_label("var_res", i));
  }
  const Mat s = means.select(state_labels).values();
  const Mat f = means.select(force_labels).values();
  const Mat sv = variances.select(state_var_labels).values();
  const Mat fv = variances.select(force_var_labels).values();
  EstimateSeries out;
  out.dt = means.dt();
  for (Eigen::Index k = 0; k < s.rows(); ++k) {
    out.state_mean.push_back(s.row(k).transpose());
    out.force_mean.push_back(f.row(k).transpose());
    out.state_cov.push_back(sv.row(k).transpose().asDiagonal());
    out.force_cov.push_back(fv.row(k).transpose().asDiagonal());
  }
  return out;
}

std::pair<Mat, Mat> discretize(const Mat& A_c, const Mat& B_c, double dt) {
  const auto d = A_c.rows();
  const auto m = B_c.cols();
  if (A_c.cols() != d || B_c.rows() != d) throw std::invalid_argument("discretize: dimension mismatch");
  Mat big = Mat::Zero(d + m, d + m);
  big.topLeftCorner(d, d) = A_c * dt;
  big.topRightCorner(d, m) = B_c * dt;
  const Mat e = big.exp();
  return {e.topLeftCorner(d, d), e.topRightCorner(d, m)};
}

LinearFilterModel build_linear_filter_model(const SystemModel& known, double dt, const FilterNoiseConfig& cfg) {
  known.validate();
  if (!known.is_linear()) throw std::invalid_argument("build_linear_filter_model: known model must be linear");
  if (!(dt > 0.0)) throw std::invalid_argument("build_linear_filter_model: dt must be positive");
  const auto n = static_cast<Eigen::Index>(known.n_dof());
  const Mat minv = mass_inverse(known);
  LinearFilterModel lm;
  lm.dt = dt;
  lm.A_c = Mat::Zero(2 * n, 2 * n);
  lm.A_c.topRightCorner(n, n).setIdentity();
  lm.A_c.bottomLeftCorner(n, n) = -minv * known.stiffness;
  lm.A_c.bottomRightCorner(n, n) = -minv * known.damping;
  lm.B_c = Mat::Zero(2 * n, n);
  lm.B_c.bottomRows(n) = minv;
  std::tie(lm.A_d, lm.B_d) = discretize(lm.A_c, lm.B_c, dt);
  lm.C_d = -lm.B_d;

  std::vector<Mat> am, cm, dm;
  for (const auto q : cfg.measured) {
    if (q == Measured::Acceleration) {
      am.push_back(lm.A_c.bottomRows(n));
      cm.push_back(-minv);
      dm.push_back(minv);
    } else {
      Mat sel = Mat::Zero(n, 2 * n);
      sel.leftCols(n).setIdentity();
      am.push_back(sel);
      cm.push_back(Mat::Zero(n, n));
      dm.push_back(Mat::Zero(n, n));
    }
  }
  const auto rows = n * static_cast<Eigen::Index>(cfg.measured.size());
  lm.A_m.resize(rows, 2 * n);
  lm.C_m.resize(rows, n);
  lm.D_m.resize(rows, n);
  for (std::size_t b = 0; b < am.size(); ++b) {
    const auto r0 = static_cast<Eigen::Index>(b) * n;
    lm.A_m.middleRows(r0, n) = am[b];
    lm.C_m.middleRows(r0, n) = cm[b];
    lm.D_m.middleRows(r0, n) = dm[b];
  }
  lm.T = Mat::Identity(n, n);
  lm.Q1 = Mat::Identity(n, n) * (cfg.q_force * cfg.q_force);
  lm.Q2 = state_noise(static_cast<std::size_t>(2 * n), cfg);
  lm.R_meas = measurement_noise(static_cast<std::size_t>(rows), cfg);
  lm.measurement_labels = measured_labels(known.n_dof(), cfg.measured);
  return lm;
}

NonlinearFilterModel build_nonlinear_filter_model(const SystemModel& known, double dt, const FilterNoiseConfig& cfg,
                                                  StateIntegrator integrator) {
  known.validate();
  if (known.has_hysteresis())
    throw std::invalid_argument("build_nonlinear_filter_model: known models with hysteretic states are not supported");
  if (!(dt > 0.0)) throw std::invalid_argument("build_nonlinear_filter_model: dt must be positive");
  const auto n = static_cast<Eigen::Index>(known.n_dof());
  const Mat minv = mass_inverse(known);

  // Known drift with the residual entering as an extra restoring force.
  auto drift = [known, minv, n](const Vec& y, const Vec& input, const Vec& force) {
    Vec out(2 * n);
    out.head(n) = y.tail(n);
    out.tail(n) = minv * (input - restoring_force(known, y.head(n), y.tail(n)) - force);
    return out;
  };

  NonlinearFilterModel nm;
  nm.dt = dt;
  nm.state_dim = static_cast<std::size_t>(2 * n);
  nm.force_dim = static_cast<std::size_t>(n);
  nm.f1 = [](const Vec& f) { return f; };
  if (integrator == StateIntegrator::Euler) {
    nm.f2 = [drift, dt](const Vec& y, const Vec& input, const Vec& force) { return Vec(y + dt * drift(y, input, force)); };
  } else {
    nm.f2 = [drift, dt](const Vec& y, const Vec& input, const Vec& force) {
      const Vec k1 = drift(y, input, force);
      const Vec k2 = drift(y + 0.5 * dt * k1, input, force);
      const Vec k3 = drift(y + 0.5 * dt * k2, input, force);
      const Vec k4 = drift(y + dt * k3, input, force);
      return Vec(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    };
  }
  const auto measured = cfg.measured;
  nm.h = [drift, measured, n](const Vec& y, const Vec& force, const Vec& input) {
    Vec z(n * static_cast<Eigen::Index>(measured.size()));
    for (std::size_t b = 0; b < measured.size(); ++b) {
      const auto r0 = static_cast<Eigen::Index>(b) * n;
      if (measured[b] == Measured::Acceleration)
        z.segment(r0, n) = drift(y, input, force).tail(n);
      else
        z.segment(r0, n) = y.head(n);
    }
    return z;
  };
  const auto rows = static_cast<std::size_t>(n) * measured.size();
  nm.Q1 = Mat::Identity(n, n) * (cfg.q_force * cfg.q_force);
  nm.Q2 = state_noise(static_cast<std::size_t>(2 * n), cfg);
  nm.R_meas = measurement_noise(rows, cfg);
  nm.measurement_labels = measured_labels(known.n_dof(), measured);
  return nm;
}

NonlinearFilterModel as_nonlinear(const LinearFilterModel& lm) {
  NonlinearFilterModel nm;
  nm.dt = lm.dt;
  nm.state_dim = static_cast<std::size_t>(lm.A_d.rows());
  nm.force_dim = static_cast<std::size_t>(lm.C_d.cols());
  const Mat T = lm.T;
  nm.f1 = [T](const Vec& f) { return Vec(T * f); };
  const Mat A = lm.A_d, B = lm.B_d, C = lm.C_d;
  nm.f2 = [A, B, C](const Vec& y, const Vec& input, const Vec& force) { return Vec(A * y + B * input + C * force); };
  const Mat Am = lm.A_m, Cm = lm.C_m, Dm = lm.D_m;
  nm.h = [Am, Cm, Dm](const Vec& y, const Vec& force, const Vec& input) { return Vec(Am * y + Cm * force + Dm * input); };
  nm.Q1 = lm.Q1;
  nm.Q2 = lm.Q2;
  nm.R_meas = lm.R_meas;
  nm.measurement_labels = lm.measurement_labels;
  return nm;
}

Mat measurement_matrix(const TimeSeries& measurements, const std::vector<std::string>& labels) {
  return measurements.select(labels).values();
}

EstimateSeries run_dkf(const LinearFilterModel& model, const TimeSeries& measurements, const TimeSeries& known_input,
                       const FilterInit& init) {
  const Mat Z = measurement_matrix(measurements, model.measurement_labels);
  const auto count = static_cast<std::size_t>(Z.rows());
  const auto nf = model.C_d.cols();
  const Mat U = input_matrix(known_input, static_cast<std::size_t>(model.B_d.cols()), count);
  const Mat& Hs = model.A_m;
  const Mat& Hf = model.C_m;

  Vec ps = init.state_mean;
  Mat Cps = init.state_cov;
  Vec pf = init.force_mean;
  Mat Cpf = init.force_cov;
  if (ps.size() != model.A_d.rows() || pf.size() != nf) throw std::invalid_argument("run_dkf: init has wrong dimensions");

  EstimateSeries est;
  est.dt = measurements.dt();
  est.state_mean.reserve(count);
  est.state_cov.reserve(count);
  est.force_mean.reserve(count);
  est.force_cov.reserve(count);

  for (std::size_t k = 0; k < count; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const Vec z = Z.row(r).transpose();
    const Vec u = U.row(r).transpose();
    if (!z.allFinite() || !u.allFinite()) throw FilterError("run_dkf: non-finite measurement or input", k);

    // Force measurement update.
    const Vec ef = z - (Hs * ps + Hf * pf + model.D_m * u);
    const Mat Sf = symmetrized(Hf * Cpf * Hf.transpose() + model.R_meas);
    Eigen::LDLT<Mat> Sf_ldlt(Sf);
    if (Sf_ldlt.info() != Eigen::Success || !Sf_ldlt.isPositive() || Sf_ldlt.vectorD().minCoeff() <= 0.0)
      throw FilterError("run_dkf: force innovation covariance is not invertible", k);
    const Mat Kf = Sf_ldlt.solve(Hf * Cpf).transpose();
    const Vec cf = pf + Kf * ef;
    const Mat Ccf = symmetrized(Cpf - Kf * Hf * Cpf);

    // State measurement update with the updated force.
    const Vec es = z - (Hs * ps + Hf * cf + model.D_m * u);
    const Mat Ss = symmetrized(Hs * Cps * Hs.transpose() + model.R_meas);
    Eigen::LDLT<Mat> Ss_ldlt(Ss);
    if (Ss_ldlt.info() != Eigen::Success || !Ss_ldlt.isPositive() || Ss_ldlt.vectorD().minCoeff() <= 0.0)
      throw FilterError("run_dkf: state innovation covariance is not invertible", k);
    const Mat Ks = Ss_ldlt.solve(Hs * Cps).transpose();
    const Vec cs = ps + Ks * es;
    const Mat Ccs = symmetrized(Cps - Ks * Hs * Cps);

    if (!cf.allFinite() || !cs.allFinite()) throw FilterError("run_dkf: estimate became non-finite", k);
    check_psd(Ccf, k, "run_dkf: force covariance");
    check_psd(Ccs, k, "run_dkf: state covariance");
    est.force_mean.push_back(cf);
    est.force_cov.push_back(Ccf);
    est.state_mean.push_back(cs);
    est.state_cov.push_back(Ccs);

    // Time updates.
    pf = model.T * cf;
    Cpf = symmetrized(model.T * Ccf * model.T.transpose() + model.Q1);
    ps = model.A_d * cs + model.B_d * u + model.C_d * cf;
    Cps = symmetrized(model.A_d * Ccs * model.A_d.transpose() + model.Q2);
  }
  return est;
}

namespace {

Mat sigma_points(const Vec& mean, const Mat& cov, double scale, std::size_t step, const char* what) {
  Mat root;
  try {
    root = psd_sqrt(cov);
  } catch (const std::exception& e) {
    throw FilterError(std::string("run_dukf: ") + what + " square root failed: " + e.what(), step);
  }
  const auto L = mean.size();
  Mat pts(L, 2 * L + 1);
  pts.col(0) = mean;
  const double c = std::sqrt(scale);
  for (Eigen::Index i = 0; i < L; ++i) {
    pts.col(1 + i) = mean + c * root.col(i);
    pts.col(1 + L + i) = mean - c * root.col(i);
  }
  return pts;
}

Vec weighted_mean(const Mat& pts, const Vec& w) { return pts * w; }

Mat weighted_cross(const Mat& a, const Vec& ma, const Mat& b, const Vec& mb, const Vec& w) {
  const Mat da = a.colwise() - ma;
  const Mat db = b.colwise() - mb;
  return da * w.asDiagonal() * db.transpose();
}

void require_finite(const Mat& m, std::size_t step, const char* what) {
  if (!m.allFinite()) throw FilterError(std::string("run_dukf: ") + what + " produced non-finite values", step);
}

Mat gain(const Mat& cross, const Mat& S, std::size_t step, const char* what) {
  Eigen::LDLT<Mat> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
    throw FilterError(std::string("run_dukf: ") + what + " innovation covariance is not invertible", step);
  return ldlt.solve(cross.transpose()).transpose();
}

}  // namespace

EstimateSeries run_dukf(const NonlinearFilterModel& model, const TimeSeries& measurements, const TimeSeries& known_input,
                        const FilterInit& init, const UtParams& force_ut, const UtParams& state_ut) {
  const Mat Z = measurement_matrix(measurements, model.measurement_labels);
  const auto count = static_cast<std::size_t>(Z.rows());
  const std::size_t Lf = model.force_dim;
  const std::size_t Ls = model.state_dim;
  const Mat U = input_matrix(known_input, Ls / 2, count);
  const UtWeights w1 = compute_ut_weights(Lf, force_ut.alpha, force_ut.beta, force_ut.kappa);
  const UtWeights w2 = compute_ut_weights(Ls, state_ut.alpha, state_ut.beta, state_ut.kappa);
  const double s1 = static_cast<double>(Lf) + w1.lambda;
  const double s2 = static_cast<double>(Ls) + w2.lambda;

  Vec m1 = init.force_mean;
  Mat P1 = init.force_cov;
  Vec m2 = init.state_mean;
  Mat P2 = init.state_cov;
  if (static_cast<std::size_t>(m1.size()) != Lf || static_cast<std::size_t>(m2.size()) != Ls)
    throw std::invalid_argument("run_dukf: init has wrong dimensions");

  EstimateSeries est;
  est.dt = measurements.dt();
  est.state_mean.reserve(count);
  est.state_cov.reserve(count);
  est.force_mean.reserve(count);
  est.force_cov.reserve(count);

  const auto nz = Z.cols();
  for (std::size_t k = 0; k < count; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const Vec z = Z.row(r).transpose();
    const Vec u = U.row(r).transpose();
    if (!z.allFinite() || !u.allFinite()) throw FilterError("run_dukf: non-finite measurement or input", k);

    // Force measurement update, state held at its predicted mean.
    const Mat F = sigma_points(m1, P1, s1, k, "force covariance");
    Mat Z1(nz, F.cols());
    for (Eigen::Index i = 0; i < F.cols(); ++i) Z1.col(i) = model.h(m2, F.col(i), u);
    require_finite(Z1, k, "force sigma-point measurement");
    const Vec mu1 = weighted_mean(Z1, w1.w_mean);
    const Mat S1 = symmetrized(weighted_cross(Z1, mu1, Z1, mu1, w1.w_cov) + model.R_meas);
    const Mat C1 = weighted_cross(F, m1, Z1, mu1, w1.w_cov);
    const Mat K1 = gain(C1, S1, k, "force");
    const Vec m1c = m1 + K1 * (z - mu1);
    const Mat P1c = symmetrized(P1 - K1 * S1 * K1.transpose());

    // State measurement update with the updated force.
    const Mat Y = sigma_points(m2, P2, s2, k, "state covariance");
    Mat Z2(nz, Y.cols());
    for (Eigen::Index i = 0; i < Y.cols(); ++i) Z2.col(i) = model.h(Y.col(i), m1c, u);
    require_finite(Z2, k, "state sigma-point measurement");
    const Vec mu2 = weighted_mean(Z2, w2.w_mean);
    const Mat S2 = symmetrized(weighted_cross(Z2, mu2, Z2, mu2, w2.w_cov) + model.R_meas);
    const Mat C2 = weighted_cross(Y, m2, Z2, mu2, w2.w_cov);
    const Mat K2 = gain(C2, S2, k, "state");
    const Vec m2c = m2 + K2 * (z - mu2);
    const Mat P2c = symmetrized(P2 - K2 * S2 * K2.transpose());

    if (!m1c.allFinite() || !m2c.allFinite()) throw FilterError("run_dukf: estimate became non-finite", k);
    est.force_mean.push_back(m1c);
    est.force_cov.push_back(P1c);
    est.state_mean.push_back(m2c);
    est.state_cov.push_back(P2c);

    // Force time update.
    const Mat Fc = sigma_points(m1c, P1c, s1, k, "updated force covariance");
    Mat FF(static_cast<Eigen::Index>(Lf), Fc.cols());
    for (Eigen::Index i = 0; i < Fc.cols(); ++i) FF.col(i) = model.f1(Fc.col(i));
    require_finite(FF, k, "force transition");
    m1 = weighted_mean(FF, w1.w_mean);
    P1 = symmetrized(weighted_cross(FF, m1, FF, m1, w1.w_cov) + model.Q1);

    // State time update driven by the known input and the force estimate.
    const Mat Yc = sigma_points(m2c, P2c, s2, k, "updated state covariance");
    Mat YY(static_cast<Eigen::Index>(Ls), Yc.cols());
    for (Eigen::Index i = 0; i < Yc.cols(); ++i) YY.col(i) = model.f2(Yc.col(i), u, m1c);
    require_finite(YY, k, "state transition");
    m2 = weighted_mean(YY, w2.w_mean);
    P2 = symmetrized(weighted_cross(YY, m2, YY, m2, w2.w_cov) + model.Q2);
  }
  return est;
}

}  // namespace graybox
