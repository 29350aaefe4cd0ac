#pragma once

#include <string>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/filters.hpp"
#include "graybox/gpr.hpp"
#include "graybox/sde_sim.hpp"
#include "graybox/timeseries.hpp"

namespace graybox {

enum class FilterChoice { Auto, DKF, DUKF };

struct FilterConfig {
  FilterChoice choice = FilterChoice::Auto;
  FilterNoiseConfig noise;
  StateIntegrator integrator = StateIntegrator::Euler;
  UtParams force_ut;
  UtParams state_ut;
};

struct GpConfig {
  KernelFamily kernel = KernelFamily::SquaredExponential;
  MeanFamily mean = MeanFamily::Zero;
  FeatureSpec features;
  std::size_t stride = 1;
  std::size_t max_points = 2000;
  double training_window = 40.0;  // seconds, inclusive of both ends
  GpFitOptions fit;
};

/// Known model plus one GP per residual channel. The GP mean enters the
/// equations of motion as an extra restoring force.
struct CorrectedModel {
  SystemModel known;
  std::vector<GpModel> residual_gps;
  FeatureSpec feature_spec;

  /// GP residual at state y = [x, v]; zero when there are no GPs.
  Vec residual(const Vec& y) const;
  Vec drift(const Vec& y, const Vec& force) const;
};

/// "DKF" or "DUKF" according to the configured choice and the known model.
std::string selected_filter(const SystemModel& known, const FilterConfig& cfg);

EstimateSeries estimate_residual(const SystemModel& known, const TimeSeries& measurements, const TimeSeries& known_input,
                                 const FilterConfig& cfg);

/// Number of samples in a window [0, seconds] at step dt.
std::size_t window_samples(double seconds, double dt);

CorrectedModel build_corrected_model(const SystemModel& known, const EstimateSeries& estimates, const GpConfig& cfg);

/// Deterministic forward solve of the corrected model with RK4, cfg.substeps
/// steps per sample and the forcing linear between samples. Channels disp_i,
/// vel_i, acc_i. Starts from cfg's initial conditions.
TimeSeries predict_response(const CorrectedModel& corrected, const TimeSeries& forcing, const SimConfig& cfg);

struct MetricWindow {
  std::string name;
  double t_begin = 0.0;
  double t_end = 0.0;  // inclusive
  bool include_begin = true;
};

struct ChannelMetrics {
  std::string channel;
  std::string window;
  double rmse = 0.0;
  double nrmse = 0.0;
  double correlation = 0.0;
};

struct RunReport {
  std::vector<MetricWindow> windows;
  std::vector<ChannelMetrics> metrics;

  const ChannelMetrics& find(const std::string& channel, const std::string& window) const;
};

double rmse(const Vec& a, const Vec& b);
/// RMSE divided by the RMS of `truth`.
double normalized_rmse(const Vec& predicted, const Vec& truth);
/// Pearson correlation; 0 when either input is constant.
double correlation(const Vec& a, const Vec& b);

/// Metrics for every channel present in both series, per window.
RunReport evaluate(const TimeSeries& predicted, const TimeSeries& truth, const std::vector<MetricWindow>& windows);

}  // namespace graybox
