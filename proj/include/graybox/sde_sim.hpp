#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/timeseries.hpp"

namespace graybox {

enum class Measured { Acceleration, Displacement };

struct SimConfig {
  double dt = 0.005;
  double duration = 1.0;
  std::uint64_t seed = 0;
  /// One entry per measured channel, or a single entry applied to all. Empty
  /// means `default_noise_fraction` of each channel's RMS.
  Vec measurement_noise_std;
  double default_noise_fraction = 0.01;
  std::vector<Measured> measured{Measured::Acceleration};
  /// Integrator steps per output sample.
  int substeps = 1;
  double blowup_bound = 1e6;
  Vec initial_displacement;  // empty = zero
  Vec initial_velocity;      // empty = zero

  void validate() const;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Ito SDE dy = a(t, y) dt + sum_j b_j(y) dW_j. The step below drops the
/// terms L^j b^k and the diffusion-weighted Hessian of a, so it is the full
/// strong order 1.5 scheme only when those vanish. That holds for mechanical
/// systems whose noise enters the velocity rows with an intensity depending
/// on displacements only, and for any additive-noise system with drift
/// affine in the noisy directions.
struct SdeSystem {
  std::function<Vec(double, const Vec&)> drift;
  std::function<Mat(double, const Vec&)> drift_jacobian;
  std::function<Vec(double, const Vec&)> drift_time_derivative;
  std::function<Mat(double, const Vec&)> diffusion;  // columns are b_j
  /// Columns are (db_j/dy) a. Null when the diffusion is constant.
  std::function<Mat(double, const Vec&)> diffusion_drift_derivative;
};

/// One Taylor 1.5 step of length h from (t, y). dW and dZ hold the Wiener
/// increments and the integrals int int dW ds for each noise channel.
Vec taylor15_step(const SdeSystem& system, double t, const Vec& y, double h, const Vec& dW, const Vec& dZ);

/// Mechanical model driven by a force that is linear in time over the
/// current sample: F(t) = force + (t - t0) * force_rate.
SdeSystem mechanical_sde(const SystemModel& model, double t0, Vec force, Vec force_rate);

/// Integrates the stochastic equations of motion. Output channels are
/// disp_i, vel_i, z (Bouc-Wen only) and acc_i, one row per forcing sample.
/// Accelerations are the drift at each sample. The forcing is held linear
/// between samples. Throws DivergenceError when a state exceeds the bound.
TimeSeries simulate_taylor15(const SystemModel& model, const TimeSeries& forcing, const SimConfig& cfg);

/// Noise standard deviation per measured channel, resolved against the
/// simulated record when defaults apply.
Vec measurement_noise_stds(const TimeSeries& states, const SimConfig& cfg);

/// Noisy measured channels (acc_i and/or disp_i) followed by the noise-free
/// input forces force_i. Noise is seeded with cfg.seed + 1.
TimeSeries synthesize_measurements(const TimeSeries& states, const SystemModel& model, const TimeSeries& forcing,
                                   const SimConfig& cfg);

/// Labels of the measured channels in measurement order.
std::vector<std::string> measured_labels(std::size_t n_dof, const std::vector<Measured>& measured);

}  // namespace graybox
