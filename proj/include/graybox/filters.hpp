#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/sde_sim.hpp"
#include "graybox/timeseries.hpp"

namespace graybox {

class FilterError : public std::runtime_error {
 public:
  FilterError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Noise and initialization settings shared by both filters.
struct FilterNoiseConfig {
  double q_force = 0.1;       // Q1 = q_force^2 * I
  Vec q_state;                // diagonal of Q2; empty = q_state_default on every state
  double q_state_default = 1e-8;
  Vec r_std;                  // measurement noise std per measured channel
  Vec init_state_mean;        // empty = zero
  double init_state_var = 1.0;
  double init_force_var = 100.0;
  std::vector<Measured> measured{Measured::Acceleration};
};

/// y_{k+1} = A_d y_k + B_d F_k + C_d R_k,  z_k = A_m y_k + C_m R_k + D_m F_k.
/// D_m carries the direct feedthrough of the known input into the
/// acceleration rows.
struct LinearFilterModel {
  double dt = 0.0;
  Mat A_c, B_c;
  Mat A_d, B_d, C_d;
  Mat A_m, C_m, D_m;
  Mat T;
  Mat Q1, Q2, R_meas;
  std::vector<std::string> measurement_labels;
};

/// Function-handle counterpart. f2 advances the state one sample given the
/// known input and the residual force; h maps (state, residual, input) to
/// measurements.
struct NonlinearFilterModel {
  double dt = 0.0;
  std::size_t state_dim = 0;
  std::size_t force_dim = 0;
  std::function<Vec(const Vec& force)> f1;
  std::function<Vec(const Vec& state, const Vec& input, const Vec& force)> f2;
  std::function<Vec(const Vec& state, const Vec& force, const Vec& input)> h;
  Mat Q1, Q2, R_meas;
  std::vector<std::string> measurement_labels;
};

struct FilterInit {
  Vec state_mean;
  Mat state_cov;
  Vec force_mean;
  Mat force_cov;

  static FilterInit defaults(std::size_t state_dim, std::size_t force_dim, const FilterNoiseConfig& cfg);
};

struct UtParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;
};

struct UtWeights {
  std::size_t L = 0;
  double lambda = 0.0;
  Vec w_mean;
  Vec w_cov;
};

UtWeights compute_ut_weights(std::size_t L, double alpha, double beta, double kappa);

struct EstimateSeries {
  double dt = 0.0;
  std::vector<Vec> state_mean;
  std::vector<Mat> state_cov;
  std::vector<Vec> force_mean;
  std::vector<Mat> force_cov;

  std::size_t length() const { return state_mean.size(); }
  /// Columns disp_i, vel_i, res_i.
  TimeSeries means() const;
  /// Diagonals of the covariances: var_disp_i, var_vel_i, var_res_i.
  TimeSeries variances() const;
  /// Rebuilds an estimate (without off-diagonal covariance) from the two
  /// tables written by means() and variances().
  static EstimateSeries from_tables(const TimeSeries& means, const TimeSeries& variances);
};

/// Exact zero-order-hold discretization. Returns [A_d, B_d] with
/// A_d = exp(A_c dt) and B_d = int_0^dt exp(A_c s) ds B_c, both taken from
/// one block exponential so a singular A_c is fine.
std::pair<Mat, Mat> discretize(const Mat& A_c, const Mat& B_c, double dt);

LinearFilterModel build_linear_filter_model(const SystemModel& known, double dt, const FilterNoiseConfig& cfg);

enum class StateIntegrator { Euler, RK4 };

NonlinearFilterModel build_nonlinear_filter_model(const SystemModel& known, double dt, const FilterNoiseConfig& cfg,
                                                  StateIntegrator integrator = StateIntegrator::Euler);

/// Wraps a linear model in function handles; used to cross-check the DUKF.
NonlinearFilterModel as_nonlinear(const LinearFilterModel& model);

/// Measurement matrix aligned with model.measurement_labels, taken from
/// `measurements` by label.
Mat measurement_matrix(const TimeSeries& measurements, const std::vector<std::string>& labels);

EstimateSeries run_dkf(const LinearFilterModel& model, const TimeSeries& measurements, const TimeSeries& known_input,
                       const FilterInit& init);

EstimateSeries run_dukf(const NonlinearFilterModel& model, const TimeSeries& measurements, const TimeSeries& known_input,
                        const FilterInit& init, const UtParams& force_ut = {}, const UtParams& state_ut = {});

}  // namespace graybox
