#pragma once

#include <optional>
#include <variant>

#include "graybox/linalg.hpp"

namespace graybox {

struct NoNonlinearity {};

/// Cubic springs following the chain: alpha*x_1^3 to ground plus
/// alpha*(x_i - x_{i+1})^3 on every link.
struct DuffingChain {
  double alpha = 0.0;
};

/// Bouc-Wen hysteretic element attached to one DOF. Contributes the force
/// (1 - k_r) * Q_y * z, with z evolving under the attached DOF's velocity.
struct BoucWen {
  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 0.5;
  double eta = 1.0;
  double k_r = 1.0 / 6.0;
  double D_y = 0.013;
  double Q_y = 0.0;
  std::size_t attached_dof = 0;
};

/// Duffing-Van der Pol style oscillator. With the flag set the linear spring
/// enters as -K x, giving the double-well potential.
struct DuffingVanDerPol {
  double alpha = 0.0;
  bool negative_linear_stiffness = true;
};

using NonlinearityKind = std::variant<NoNonlinearity, DuffingChain, BoucWen, DuffingVanDerPol>;

enum class NoiseMode { Additive, DisplacementMultiplicative };

struct SystemModel {
  Mat mass;
  Mat damping;
  Mat stiffness;
  NonlinearityKind nonlinearity = NoNonlinearity{};
  Vec noise_intensity;  // diagonal of Sigma, one entry per DOF
  NoiseMode noise_mode = NoiseMode::Additive;

  std::size_t n_dof() const { return static_cast<std::size_t>(mass.rows()); }
  bool has_hysteresis() const { return std::holds_alternative<BoucWen>(nonlinearity); }
  bool is_linear() const { return std::holds_alternative<NoNonlinearity>(nonlinearity); }
  /// Length of the flattened state: 2n, plus one for the Bouc-Wen variable.
  std::size_t state_dim() const { return 2 * n_dof() + (has_hysteresis() ? 1 : 0); }
  /// Stiffness as it enters the equations of motion (sign flip for DVP).
  Mat effective_stiffness() const;

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

/// Chain assembly: K(i,i) = k_i + k_{i+1}, K(i,i+1) = K(i+1,i) = -k_{i+1}.
Mat chain_matrix(const Vec& element_values);

SystemModel make_chain_model(const Vec& masses, const Vec& springs, const Vec& dampers,
                             NonlinearityKind nonlinearity = NoNonlinearity{},
                             Vec noise_intensity = Vec(), NoiseMode mode = NoiseMode::Additive);

struct AugmentedState {
  Vec displacement;
  Vec velocity;
  std::optional<double> hysteretic;

  static AugmentedState zero(const SystemModel& model);
  static AugmentedState from_flat(const SystemModel& model, const Vec& y);
  Vec flat() const;
};

/// Nonlinear restoring force N(X, z).
Vec nonlinear_force(const SystemModel& model, const Vec& x, double z);

/// Total internal force C*v + K*x + N, i.e. everything on the left-hand side
/// apart from inertia.
Vec restoring_force(const SystemModel& model, const Vec& x, const Vec& v, double z = 0.0);

/// Bouc-Wen z-dot for the given attached velocity.
double bouc_wen_rate(const BoucWen& bw, double velocity, double z);

AugmentedState eval_rhs(const SystemModel& model, const AugmentedState& state, const Vec& force);

/// Flattened form of eval_rhs used by the integrators and filters.
Vec eval_rhs_flat(const SystemModel& model, const Vec& y, const Vec& force);

/// Jacobian of eval_rhs_flat with respect to y. Absolute values in the
/// Bouc-Wen rate are differentiated with sign(0) = 0.
Mat rhs_jacobian(const SystemModel& model, const Vec& y);

/// Ground-truth residual force: restoring force of the true system minus
/// that of the known system at the same kinematic state.
Vec true_residual(const SystemModel& true_model, const SystemModel& known_model, const AugmentedState& state);

}  // namespace graybox
