#include "graybox/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace graybox {

namespace {

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

void require_dim(const Vec& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n)
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                                std::to_string(v.size()));
}

Mat mass_inverse(const SystemModel& model) {
  Eigen::LLT<Mat> llt(model.mass);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("mass matrix is not positive definite");
  return llt.solve(Mat::Identity(model.mass.rows(), model.mass.cols()));
}

}  // namespace

Mat SystemModel::effective_stiffness() const {
  if (const auto* dvp = std::get_if<DuffingVanDerPol>(&nonlinearity); dvp && dvp->negative_linear_stiffness)
    return -stiffness;
  return stiffness;
}

void SystemModel::validate() const {
  const auto n = mass.rows();
  if (n == 0) throw std::invalid_argument("model: n_dof must be positive");
  if (mass.cols() != n || damping.rows() != n || damping.cols() != n || stiffness.rows() != n ||
      stiffness.cols() != n)
    throw std::invalid_argument("model: mass, damping and stiffness must all be n x n");
  if (!(mass - mass.transpose()).isZero(1e-12 * mass.norm())) throw std::invalid_argument("model: mass is not symmetric");
  Eigen::LLT<Mat> llt(mass);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("model: mass is not positive definite");
  if (!(damping - damping.transpose()).isZero(1e-12 * (1.0 + damping.norm())))
    throw std::invalid_argument("model: damping is not symmetric");
  if (!(stiffness - stiffness.transpose()).isZero(1e-12 * (1.0 + stiffness.norm())))
    throw std::invalid_argument("model: stiffness is not symmetric");
  if (noise_intensity.size() != 0) {
    if (noise_intensity.size() != n) throw std::invalid_argument("model: noise_intensity must have n entries");
    if ((noise_intensity.array() < 0.0).any()) throw std::invalid_argument("model: noise_intensity must be >= 0");
  }
  if (const auto* bw = std::get_if<BoucWen>(&nonlinearity)) {
    if (bw->eta < 1.0) throw std::invalid_argument("model: Bouc-Wen eta must be >= 1");
    if (!(bw->D_y > 0.0)) throw std::invalid_argument("model: Bouc-Wen D_y must be positive");
    if (bw->Q_y < 0.0) throw std::invalid_argument("model: Bouc-Wen Q_y must be >= 0");
    if (bw->attached_dof >= static_cast<std::size_t>(n))
      throw std::invalid_argument("model: Bouc-Wen attached_dof out of range");
  }
}

Mat chain_matrix(const Vec& element_values) {
  const auto n = element_values.size();
  Mat k = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) += element_values(i);
    if (i + 1 < n) {
      k(i, i) += element_values(i + 1);
      k(i, i + 1) -= element_values(i + 1);
      k(i + 1, i) -= element_values(i + 1);
    }
  }
  return k;
}

SystemModel make_chain_model(const Vec& masses, const Vec& springs, const Vec& dampers, NonlinearityKind nonlinearity,
                             Vec noise_intensity, NoiseMode mode) {
  if (springs.size() != masses.size() || dampers.size() != masses.size())
    throw std::invalid_argument("make_chain_model: masses, springs and dampers must have equal length");
  SystemModel m;
  m.mass = masses.asDiagonal();
  m.damping = chain_matrix(dampers);
  m.stiffness = chain_matrix(springs);
  m.nonlinearity = std::move(nonlinearity);
  m.noise_intensity = noise_intensity.size() ? std::move(noise_intensity) : Vec::Zero(masses.size());
  m.noise_mode = mode;
  m.validate();
  return m;
}

AugmentedState AugmentedState::zero(const SystemModel& model) {
  AugmentedState s{Vec::Zero(model.n_dof()), Vec::Zero(model.n_dof()), std::nullopt};
  if (model.has_hysteresis()) s.hysteretic = 0.0;
  return s;
}

AugmentedState AugmentedState::from_flat(const SystemModel& model, const Vec& y) {
  const auto n = static_cast<Eigen::Index>(model.n_dof());
  if (y.size() < 2 * n) throw std::invalid_argument("AugmentedState::from_flat: vector too short");
  AugmentedState s{y.head(n), y.segment(n, n), std::nullopt};
  if (model.has_hysteresis()) {
    if (y.size() < 2 * n + 1) throw std::invalid_argument("AugmentedState::from_flat: missing hysteretic variable");
    s.hysteretic = y(2 * n);
  }
  return s;
}

Vec AugmentedState::flat() const {
  const auto n = displacement.size();
  Vec y(2 * n + (hysteretic ? 1 : 0));
  y.head(n) = displacement;
  y.segment(n, n) = velocity;
  if (hysteretic) y(2 * n) = *hysteretic;
  return y;
}

Vec nonlinear_force(const SystemModel& model, const Vec& x, double z) {
  const auto n = x.size();
  Vec out = Vec::Zero(n);
  std::visit(
      [&](const auto& nl) {
        using T = std::decay_t<decltype(nl)>;
        if constexpr (std::is_same_v<T, DuffingChain>) {
          out(0) += nl.alpha * x(0) * x(0) * x(0);
          for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const double d = x(i) - x(i + 1);
            const double f = nl.alpha * d * d * d;
            out(i) += f;
            out(i + 1) -= f;
          }
        } else if constexpr (std::is_same_v<T, BoucWen>) {
          out(static_cast<Eigen::Index>(nl.attached_dof)) += (1.0 - nl.k_r) * nl.Q_y * z;
        } else if constexpr (std::is_same_v<T, DuffingVanDerPol>) {
          for (Eigen::Index i = 0; i < n; ++i) out(i) += nl.alpha * x(i) * x(i) * x(i);
        }
      },
      model.nonlinearity);
  return out;
}

Vec restoring_force(const SystemModel& model, const Vec& x, const Vec& v, double z) {
  return model.damping * v + model.effective_stiffness() * x + nonlinear_force(model, x, z);
}

double bouc_wen_rate(const BoucWen& bw, double velocity, double z) {
  const double az = std::abs(z);
  // |z|^(eta-1) is taken as 1 for eta == 1 so that z = 0 is well defined.
  const double pow_em1 = bw.eta == 1.0 ? 1.0 : std::pow(az, bw.eta - 1.0);
  const double pow_e = bw.eta == 1.0 ? az : std::pow(az, bw.eta);
  return (bw.alpha * velocity - bw.gamma * z * std::abs(velocity) * pow_em1 - bw.beta * velocity * pow_e) / bw.D_y;
}

Vec eval_rhs_flat(const SystemModel& model, const Vec& y, const Vec& force) {
  const auto n = static_cast<Eigen::Index>(model.n_dof());
  require_dim(force, model.n_dof(), "eval_rhs: force");
  require_dim(y, model.state_dim(), "eval_rhs: state");
  const double z = model.has_hysteresis() ? y(2 * n) : 0.0;
  Vec out(y.size());
  out.head(n) = y.segment(n, n);
  const Vec rhs = force - restoring_force(model, y.head(n), y.segment(n, n), z);
  Eigen::LLT<Mat> llt(model.mass);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("eval_rhs: mass matrix is not positive definite");
  out.segment(n, n) = llt.solve(rhs);
  if (const auto* bw = std::get_if<BoucWen>(&model.nonlinearity))
    out(2 * n) = bouc_wen_rate(*bw, y(n + static_cast<Eigen::Index>(bw->attached_dof)), z);
  return out;
}

AugmentedState eval_rhs(const SystemModel& model, const AugmentedState& state, const Vec& force) {
  return AugmentedState::from_flat(model, eval_rhs_flat(model, state.flat(), force));
}

Mat rhs_jacobian(const SystemModel& model, const Vec& y) {
  const auto n = static_cast<Eigen::Index>(model.n_dof());
  const auto d = static_cast<Eigen::Index>(model.state_dim());
  require_dim(y, model.state_dim(), "rhs_jacobian: state");
  const Mat minv = mass_inverse(model);
  const Vec x = y.head(n);

  // Jacobian of the restoring force with respect to (x, v, z).
  Mat dfdx = model.effective_stiffness();
  Mat dfdz = Mat::Zero(n, 1);
  std::visit(
      [&](const auto& nl) {
        using T = std::decay_t<decltype(nl)>;
        if constexpr (std::is_same_v<T, DuffingChain>) {
          dfdx(0, 0) += 3.0 * nl.alpha * x(0) * x(0);
          for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const double g = 3.0 * nl.alpha * (x(i) - x(i + 1)) * (x(i) - x(i + 1));
            dfdx(i, i) += g;
            dfdx(i, i + 1) -= g;
            dfdx(i + 1, i) -= g;
            dfdx(i + 1, i + 1) += g;
          }
        } else if constexpr (std::is_same_v<T, BoucWen>) {
          dfdz(static_cast<Eigen::Index>(nl.attached_dof), 0) = (1.0 - nl.k_r) * nl.Q_y;
        } else if constexpr (std::is_same_v<T, DuffingVanDerPol>) {
          for (Eigen::Index i = 0; i < n; ++i) dfdx(i, i) += 3.0 * nl.alpha * x(i) * x(i);
        }
      },
      model.nonlinearity);

  Mat jac = Mat::Zero(d, d);
  jac.block(0, n, n, n).setIdentity();
  jac.block(n, 0, n, n) = -minv * dfdx;
  jac.block(n, n, n, n) = -minv * model.damping;
  if (const auto* bw = std::get_if<BoucWen>(&model.nonlinearity)) {
    const auto a = n + static_cast<Eigen::Index>(bw->attached_dof);
    const double v = y(a);
    const double z = y(2 * n);
    jac.block(n, 2 * n, n, 1) = -minv * dfdz;
    const double az = std::abs(z);
    const double pe = std::pow(az, bw->eta);
    const double pem1 = bw->eta == 1.0 ? 1.0 : std::pow(az, bw->eta - 1.0);
    jac(2 * n, a) = (bw->alpha - bw->gamma * z * sgn(v) * pem1 - bw->beta * pe) / bw->D_y;
    // d/dz of z|z|^(eta-1) is eta|z|^(eta-1); d/dz of |z|^eta is eta|z|^(eta-1) sgn(z).
    jac(2 * n, 2 * n) = (-bw->gamma * std::abs(v) * bw->eta * pem1 - bw->beta * v * bw->eta * pem1 * sgn(z)) / bw->D_y;
  }
  return jac;
}

Vec true_residual(const SystemModel& true_model, const SystemModel& known_model, const AugmentedState& state) {
  if (true_model.n_dof() != known_model.n_dof())
    throw std::invalid_argument("true_residual: models have different n_dof");
  require_dim(state.displacement, true_model.n_dof(), "true_residual: displacement");
  require_dim(state.velocity, true_model.n_dof(), "true_residual: velocity");
  const double z = state.hysteretic.value_or(0.0);
  return restoring_force(true_model, state.displacement, state.velocity, z) -
         restoring_force(known_model, state.displacement, state.velocity, 0.0);
}

}  // namespace graybox
