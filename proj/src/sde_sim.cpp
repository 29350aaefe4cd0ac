#include "graybox/sde_sim.hpp"

#include "graybox/csv.hpp"

#include <cmath>
#include <random>
#include <string>

namespace graybox {

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("sim.dt must be positive");
  if (!(duration >= dt)) throw std::invalid_argument("sim.duration must be at least one sample (dt)");
  if (substeps < 1) throw std::invalid_argument("sim.substeps must be >= 1");
  if (!(blowup_bound > 0.0)) throw std::invalid_argument("sim.blowup_bound must be positive");
  if ((measurement_noise_std.array() < 0.0).any()) throw std::invalid_argument("sim.measurement_noise_std must be >= 0");
  if (default_noise_fraction < 0.0) throw std::invalid_argument("sim.default_noise_fraction must be >= 0");
  if (measured.empty()) throw std::invalid_argument("sim.measured must name at least one quantity");
}

Vec taylor15_step(const SdeSystem& system, double t, const Vec& y, double h, const Vec& dW, const Vec& dZ) {
  const Vec a = system.drift(t, y);
  const Mat ja = system.drift_jacobian(t, y);
  const Vec at = system.drift_time_derivative(t, y);
  const Mat b = system.diffusion(t, y);
  Vec next = y + a * h + b * dW + 0.5 * (at + ja * a) * h * h + (ja * b) * dZ;
  if (system.diffusion_drift_derivative) {
    const Mat lb = system.diffusion_drift_derivative(t, y);
    next += lb * (dW * h - dZ);
  }
  return next;
}

SdeSystem mechanical_sde(const SystemModel& model, double t0, Vec force, Vec force_rate) {
  const auto n = static_cast<Eigen::Index>(model.n_dof());
  const auto d = static_cast<Eigen::Index>(model.state_dim());
  const Mat minv = model.mass.llt().solve(Mat::Identity(n, n));
  const Vec sigma = model.noise_intensity.size() ? model.noise_intensity : Vec::Zero(n);
  const bool multiplicative = model.noise_mode == NoiseMode::DisplacementMultiplicative;

  SdeSystem sys;
  sys.drift = [&model, t0, force, force_rate](double t, const Vec& y) {
    return eval_rhs_flat(model, y, force + (t - t0) * force_rate);
  };
  sys.drift_jacobian = [&model](double, const Vec& y) { return rhs_jacobian(model, y); };
  sys.drift_time_derivative = [minv, force_rate, n, d](double, const Vec&) {
    Vec out = Vec::Zero(d);
    out.segment(n, n) = minv * force_rate;
    return out;
  };
  sys.diffusion = [minv, sigma, multiplicative, n, d](double, const Vec& y) {
    Mat b = Mat::Zero(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double g = multiplicative ? sigma(j) * y(j) : sigma(j);
      b.block(n, j, n, 1) = minv.col(j) * g;
    }
    return b;
  };
  if (multiplicative) {
    // b_j depends on x_j only, and dx_j/dt = v_j.
    sys.diffusion_drift_derivative = [minv, sigma, n, d](double, const Vec& y) {
      Mat out = Mat::Zero(d, n);
      for (Eigen::Index j = 0; j < n; ++j) out.block(n, j, n, 1) = minv.col(j) * (sigma(j) * y(n + j));
      return out;
    };
  }
  return sys;
}

TimeSeries simulate_taylor15(const SystemModel& model, const TimeSeries& forcing, const SimConfig& cfg) {
  cfg.validate();
  model.validate();
  const std::size_t n = model.n_dof();
  const auto ni = static_cast<Eigen::Index>(n);
  if (forcing.channels() != n)
    throw std::invalid_argument("simulate: forcing has " + std::to_string(forcing.channels()) + " channels, model has " +
                                std::to_string(n) + " DOFs");
  if (std::abs(forcing.dt() - cfg.dt) > 1e-12 * cfg.dt) throw std::invalid_argument("simulate: forcing dt differs from sim.dt");
  const std::size_t count = forcing.length();
  if (count == 0) throw std::invalid_argument("simulate: empty forcing");

  AugmentedState init = AugmentedState::zero(model);
  if (cfg.initial_displacement.size()) {
    if (cfg.initial_displacement.size() != ni) throw std::invalid_argument("sim.initial_displacement has wrong length");
    init.displacement = cfg.initial_displacement;
  }
  if (cfg.initial_velocity.size()) {
    if (cfg.initial_velocity.size() != ni) throw std::invalid_argument("sim.initial_velocity has wrong length");
    init.velocity = cfg.initial_velocity;
  }
  Vec y = init.flat();
  const auto d = y.size();

  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label("disp", i));
  for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label("vel", i));
  if (model.has_hysteresis()) labels.push_back("z");
  for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label("acc", i));
  Mat out(static_cast<Eigen::Index>(count), d + ni);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = cfg.dt / cfg.substeps;
  const double sqrt_h = std::sqrt(h);
  const double zscale = 0.5 * h * sqrt_h;
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  Vec dW(ni), dZ(ni);

  for (std::size_t k = 0; k < count; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const Vec fk = forcing.sample(k);
    out.row(row).head(d) = y.transpose();
    out.row(row).tail(ni) = eval_rhs_flat(model, y, fk).segment(ni, ni).transpose();
    if (k + 1 == count) break;
    const Vec rate = (forcing.sample(k + 1) - fk) / cfg.dt;
    const double tk = forcing.time(k);
    const SdeSystem sys = mechanical_sde(model, tk, fk, rate);
    for (int s = 0; s < cfg.substeps; ++s) {
      for (Eigen::Index j = 0; j < ni; ++j) {
        const double xi1 = normal(rng);
        const double xi2 = normal(rng);
        dW(j) = sqrt_h * xi1;
        dZ(j) = zscale * (xi1 + xi2 * inv_sqrt3);
      }
      y = taylor15_step(sys, tk + s * h, y, h, dW, dZ);
    }
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > cfg.blowup_bound)
      throw DivergenceError("simulate: state exceeded blow-up bound at step " + std::to_string(k + 1), k + 1);
  }
  return TimeSeries(cfg.dt, std::move(labels), std::move(out));
}

std::vector<std::string> measured_labels(std::size_t n_dof, const std::vector<Measured>& measured) {
  std::vector<std::string> labels;
  for (const auto q : measured)
    for (std::size_t i = 0; i < n_dof; ++i) labels.push_back(channel_label(q == Measured::Acceleration ? "acc" : "disp", i));
  return labels;
}

Vec measurement_noise_stds(const TimeSeries& states, const SimConfig& cfg) {
  std::size_t n = 0;
  while (states.has_channel(channel_label("disp", n))) ++n;
  const auto labels = measured_labels(n, cfg.measured);
  const auto m = static_cast<Eigen::Index>(labels.size());
  if (cfg.measurement_noise_std.size() == m) return cfg.measurement_noise_std;
  if (cfg.measurement_noise_std.size() == 1) return Vec::Constant(m, cfg.measurement_noise_std(0));
  if (cfg.measurement_noise_std.size() != 0)
    throw std::invalid_argument("sim.measurement_noise_std must have 1 or " + std::to_string(m) + " entries");
  Vec out(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    if (!states.has_channel(labels[static_cast<std::size_t>(c)]))
      throw std::invalid_argument("measurement channel '" + labels[static_cast<std::size_t>(c)] + "' not available");
    const Vec v = states.channel(labels[static_cast<std::size_t>(c)]);
    out(c) = cfg.default_noise_fraction * std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
  }
  return out;
}

TimeSeries synthesize_measurements(const TimeSeries& states, const SystemModel& model, const TimeSeries& forcing,
                                   const SimConfig& cfg) {
  const std::size_t n = model.n_dof();
  if (forcing.length() != states.length()) throw std::invalid_argument("synthesize_measurements: length mismatch");
  const auto labels = measured_labels(n, cfg.measured);
  const Vec stds = measurement_noise_stds(states, cfg);
  const TimeSeries clean = states.select(labels);
  Mat values = clean.values();
  std::mt19937_64 rng(cfg.seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 0; k < values.rows(); ++k)
    for (Eigen::Index c = 0; c < values.cols(); ++c) values(k, c) += stds(c) * normal(rng);
  TimeSeries meas(states.dt(), labels, std::move(values));
  for (std::size_t c = 0; c < labels.size(); ++c)
    meas.metadata["noise_std." + labels[c]] = format_double(stds(static_cast<Eigen::Index>(c)));
  TimeSeries force = forcing;
  force.metadata.clear();
  return meas.joined(force);
}

}  // namespace graybox
