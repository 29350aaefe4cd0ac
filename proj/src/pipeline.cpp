#include "graybox/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace graybox {

Vec CorrectedModel::residual(const Vec& y) const {
  const std::size_t n = known.n_dof();
  Vec r = Vec::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < residual_gps.size(); ++c) {
    const auto idx = feature_spec.state_indices(c, n);
    Vec q(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) q(static_cast<Eigen::Index>(j)) = y(static_cast<Eigen::Index>(idx[j]));
    r(static_cast<Eigen::Index>(c)) = residual_gps[c].predict_mean_at(q);
  }
  return r;
}

Vec CorrectedModel::drift(const Vec& y, const Vec& force) const {
  const auto n = static_cast<Eigen::Index>(known.n_dof());
  Vec out(2 * n);
  out.head(n) = y.tail(n);
  out.tail(n) = known.mass.llt().solve(force - restoring_force(known, y.head(n), y.tail(n)) - residual(y));
  return out;
}

std::string selected_filter(const SystemModel& known, const FilterConfig& cfg) {
  switch (cfg.choice) {
    case FilterChoice::DKF:
      if (!known.is_linear()) throw std::invalid_argument("filter: DKF requested for a nonlinear known model");
      return "DKF";
    case FilterChoice::DUKF:
      return "DUKF";
    case FilterChoice::Auto:
      break;
  }
  return known.is_linear() ? "DKF" : "DUKF";
}

EstimateSeries estimate_residual(const SystemModel& known, const TimeSeries& measurements, const TimeSeries& known_input,
                                 const FilterConfig& cfg) {
  if (measurements.length() != known_input.length())
    throw std::invalid_argument("estimate_residual: measurements and input differ in length");
  if (std::abs(measurements.dt() - known_input.dt()) > 1e-12 * measurements.dt())
    throw std::invalid_argument("estimate_residual: measurements and input differ in dt");
  const std::size_t n = known.n_dof();
  const FilterInit init = FilterInit::defaults(2 * n, n, cfg.noise);
  if (selected_filter(known, cfg) == "DKF") {
    const auto model = build_linear_filter_model(known, measurements.dt(), cfg.noise);
    return run_dkf(model, measurements, known_input, init);
  }
  const auto model = build_nonlinear_filter_model(known, measurements.dt(), cfg.noise, cfg.integrator);
  return run_dukf(model, measurements, known_input, init, cfg.force_ut, cfg.state_ut);
}

std::size_t window_samples(double seconds, double dt) { return sample_count(seconds, dt) + 1; }

CorrectedModel build_corrected_model(const SystemModel& known, const EstimateSeries& estimates, const GpConfig& cfg) {
  const std::size_t count = window_samples(cfg.training_window, estimates.dt);
  if (count > estimates.length())
    throw std::invalid_argument("build_corrected_model: training window of " + std::to_string(cfg.training_window) +
                                " s exceeds the estimate record");
  CorrectedModel cm;
  cm.known = known;
  cm.feature_spec = cfg.features;
  const auto channels = static_cast<std::size_t>(estimates.force_mean.front().size());
  for (std::size_t c = 0; c < channels; ++c) {
    const auto sel = select_features(estimates, cfg.features, c, 0, count, cfg.stride, cfg.max_points);
    GpFitOptions opts = cfg.fit;
    opts.seed = cfg.fit.seed + 1000 * c;
    try {
      cm.residual_gps.push_back(fit(sel.x, sel.y, cfg.kernel, cfg.mean, opts));
    } catch (const std::exception& e) {
      throw std::runtime_error("GP fit failed for residual channel " + std::to_string(c + 1) + ": " + e.what());
    }
  }
  return cm;
}

TimeSeries predict_response(const CorrectedModel& corrected, const TimeSeries& forcing, const SimConfig& cfg) {
  const SystemModel& known = corrected.known;
  const std::size_t n = known.n_dof();
  const auto ni = static_cast<Eigen::Index>(n);
  if (known.has_hysteresis()) throw std::invalid_argument("predict_response: known model must not carry hysteretic states");
  if (forcing.channels() != n) throw std::invalid_argument("predict_response: forcing does not match n_dof");
  if (cfg.substeps < 1) throw std::invalid_argument("predict_response: substeps must be >= 1");
  for (std::size_t c = 0; c < corrected.residual_gps.size(); ++c)
    if (corrected.residual_gps[c].input_dim() != corrected.feature_spec.state_indices(c, n).size())
      throw std::invalid_argument("predict_response: GP input dimension does not match the feature spec");

  Vec y = Vec::Zero(2 * ni);
  if (cfg.initial_displacement.size() == ni) y.head(ni) = cfg.initial_displacement;
  if (cfg.initial_velocity.size() == ni) y.tail(ni) = cfg.initial_velocity;

  const std::size_t count = forcing.length();
  const double dt = forcing.dt();
  const double h = dt / cfg.substeps;
  std::vector<std::string> labels;
  for (const char* p : {"disp", "vel", "acc"})
    for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label(p, i));
  Mat out(static_cast<Eigen::Index>(count), 3 * ni);
  for (std::size_t k = 0; k < count; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const Vec fk = forcing.sample(k);
    out.row(row).head(2 * ni) = y.transpose();
    out.row(row).tail(ni) = corrected.drift(y, fk).tail(ni).transpose();
    if (k + 1 == count) break;
    const Vec df = forcing.sample(k + 1) - fk;
    for (int s = 0; s < cfg.substeps; ++s) {
      const double a0 = static_cast<double>(s) / cfg.substeps;
      const double a1 = static_cast<double>(s + 1) / cfg.substeps;
      const Vec f0 = fk + a0 * df;
      const Vec fm = fk + 0.5 * (a0 + a1) * df;
      const Vec f1 = fk + a1 * df;
      const Vec k1 = corrected.drift(y, f0);
      const Vec k2 = corrected.drift(y + 0.5 * h * k1, fm);
      const Vec k3 = corrected.drift(y + 0.5 * h * k2, fm);
      const Vec k4 = corrected.drift(y + h * k3, f1);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > cfg.blowup_bound)
      throw DivergenceError("predict_response: state exceeded blow-up bound at step " + std::to_string(k + 1), k + 1);
  }
  return TimeSeries(dt, std::move(labels), std::move(out));
}

const ChannelMetrics& RunReport::find(const std::string& channel, const std::string& window) const {
  for (const auto& m : metrics)
    if (m.channel == channel && m.window == window) return m;
  throw std::out_of_range("RunReport: no metrics for " + channel + " in window " + window);
}

double rmse(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rmse: length mismatch");
  if (a.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double normalized_rmse(const Vec& predicted, const Vec& truth) {
  const double rms = std::sqrt(truth.squaredNorm() / static_cast<double>(truth.size()));
  const double e = rmse(predicted, truth);
  if (rms == 0.0) return e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return e / rms;
}

double correlation(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation: length mismatch");
  const Vec da = a.array() - a.mean();
  const Vec db = b.array() - b.mean();
  const double den = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (den == 0.0) return 0.0;
  return std::clamp(da.dot(db) / den, -1.0, 1.0);
}

RunReport evaluate(const TimeSeries& predicted, const TimeSeries& truth, const std::vector<MetricWindow>& windows) {
  if (predicted.length() != truth.length()) throw std::invalid_argument("evaluate: series differ in length");
  RunReport report;
  report.windows = windows;
  for (const auto& w : windows) {
    std::vector<Eigen::Index> rows;
    for (std::size_t k = 0; k < truth.length(); ++k) {
      const double t = truth.time(k);
      const double tol = 1e-9 * truth.dt();
      const bool after = w.include_begin ? t >= w.t_begin - tol : t > w.t_begin + tol;
      if (after && t <= w.t_end + tol) rows.push_back(static_cast<Eigen::Index>(k));
    }
    if (rows.empty()) throw std::invalid_argument("evaluate: window '" + w.name + "' contains no samples");
    for (const auto& label : predicted.labels()) {
      if (!truth.has_channel(label)) continue;
      const Vec p = predicted.channel(label)(rows);
      const Vec t = truth.channel(label)(rows);
      report.metrics.push_back({label, w.name, rmse(p, t), normalized_rmse(p, t), correlation(p, t)});
    }
  }
  return report;
}

}  // namespace graybox
