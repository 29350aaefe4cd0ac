#include <cmath>
#include <random>

#include "doctest.h"
#include "graybox/dynamics.hpp"
#include "test_helpers.hpp"

using namespace graybox;

namespace {

SystemModel case_i_true() {
  return make_chain_model(vec({30, 15}), vec({1000, 1000}), vec({10, 5}), DuffingChain{100.0});
}

SystemModel case_i_known() { return make_chain_model(vec({30, 15}), vec({900, 850}), vec({12, 4.5})); }

}  // namespace

TEST_CASE("eval_rhs: zero state and zero force give zero derivative") {
  BoucWen bw;
  bw.Q_y = 50.0;
  for (const auto& model :
       {case_i_true(), make_chain_model(vec({5, 20}), vec({1000, 2000}), vec({7.5, 20}), bw),
        make_chain_model(vec({10}), vec({100}), vec({2.5}), DuffingVanDerPol{10.0, true})}) {
    const AugmentedState zero = AugmentedState::zero(model);
    const AugmentedState d = eval_rhs(model, zero, Vec::Zero(static_cast<Eigen::Index>(model.n_dof())));
    CHECK(d.displacement.norm() == 0.0);
    CHECK(d.velocity.norm() == 0.0);
    CHECK(d.hysteretic.has_value() == model.has_hysteresis());
    if (d.hysteretic) CHECK(*d.hysteretic == 0.0);
  }
}

TEST_CASE("eval_rhs: double-well oscillator accelerates away from x = 1") {
  const SystemModel m = make_chain_model(vec({10}), vec({100}), vec({2.5}), DuffingVanDerPol{10.0, true});
  AugmentedState s = AugmentedState::zero(m);
  s.displacement(0) = 1.0;
  const AugmentedState d = eval_rhs(m, s, Vec::Zero(1));
  CHECK(d.velocity(0) == doctest::Approx(9.0).epsilon(1e-14));
}

TEST_CASE("bouc_wen_rate at z = 0 is alpha v / D_y") {
  BoucWen bw;
  bw.alpha = 1.3;
  for (double v : {0.01, 0.5, 3.0}) CHECK(bouc_wen_rate(bw, v, 0.0) == doctest::Approx(1.3 * v / bw.D_y));
}

TEST_CASE("restoring force of the 2-DOF Duffing chain matches a scalar expansion") {
  const SystemModel m = case_i_true();
  const double x1 = 0.1, x2 = 0.0, k1 = 1000.0, k2 = 1000.0, a = 100.0;
  const Vec f = restoring_force(m, vec({x1, x2}), Vec::Zero(2));
  const double dof1 = k1 * x1 + k2 * (x1 - x2) + a * x1 * x1 * x1 + a * std::pow(x1 - x2, 3);
  const double dof2 = k2 * (x2 - x1) + a * std::pow(x2 - x1, 3);
  CHECK(f(0) == doctest::Approx(200.2).epsilon(1e-14));
  CHECK(f(0) == doctest::Approx(dof1).epsilon(1e-14));
  CHECK(f(1) == doctest::Approx(dof2).epsilon(1e-14));
}

TEST_CASE("true_residual") {
  SUBCASE("identical models give zero") {
    AugmentedState s = AugmentedState::zero(case_i_true());
    s.displacement = vec({0.3, -0.2});
    s.velocity = vec({1.0, 2.0});
    CHECK(true_residual(case_i_true(), case_i_true(), s).norm() == 0.0);
  }
  SUBCASE("double-well against Duffing at x = 1") {
    const SystemModel t = make_chain_model(vec({10}), vec({100}), vec({2.5}), DuffingVanDerPol{10.0, true});
    const SystemModel k = make_chain_model(vec({10}), vec({50}), vec({2.5}), DuffingChain{11.0});
    AugmentedState s = AugmentedState::zero(t);
    s.displacement(0) = 1.0;
    CHECK(true_residual(t, k, s)(0) == doctest::Approx(-151.0).epsilon(1e-14));
  }
  SUBCASE("Case I equals the difference of two accelerations") {
    const SystemModel t = case_i_true(), k = case_i_known();
    AugmentedState s = AugmentedState::zero(t);
    s.displacement = vec({0.1, 0.05});
    const Vec r = true_residual(t, k, s);
    const Vec acc_t = eval_rhs(t, s, Vec::Zero(2)).velocity;
    const Vec acc_k = eval_rhs(k, s, Vec::Zero(2)).velocity;
    const Vec direct = (t.stiffness - k.stiffness) * s.displacement + nonlinear_force(t, s.displacement, 0.0);
    CHECK((r - t.mass * (acc_k - acc_t)).norm() <= 1e-10 * r.norm());
    CHECK((r - direct).norm() <= 1e-12 * r.norm());
  }
}

TEST_CASE("property: residual equals M (acc_known - acc_true) at random states") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BoucWen bw;
  bw.Q_y = 0.05 * 25.0 * 9.81;
  const SystemModel t = make_chain_model(vec({5, 20}), vec({1000, 2000}), vec({7.5, 20}), bw);
  const SystemModel k = make_chain_model(vec({5, 20}), vec({900, 850}), vec({12, 4.5}));
  for (int trial = 0; trial < 50; ++trial) {
    AugmentedState s = AugmentedState::zero(t);
    s.displacement = vec({0.05 * u(rng), 0.05 * u(rng)});
    s.velocity = vec({u(rng), u(rng)});
    s.hysteretic = 0.02 * u(rng);
    AugmentedState sk = s;
    sk.hysteretic.reset();
    const Vec r = true_residual(t, k, s);
    const Vec diff = t.mass * (eval_rhs(k, sk, Vec::Zero(2)).velocity - eval_rhs(t, s, Vec::Zero(2)).velocity);
    CHECK((r - diff).norm() <= 1e-10 * std::max(1.0, r.norm()));
  }
}

TEST_CASE("property: linear models are linear in state and force") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const SystemModel m = case_i_known();
  for (int trial = 0; trial < 20; ++trial) {
    const Vec y1 = Vec::NullaryExpr(4, [&] { return u(rng); });
    const Vec y2 = Vec::NullaryExpr(4, [&] { return u(rng); });
    const Vec f1 = Vec::NullaryExpr(2, [&] { return 100.0 * u(rng); });
    const Vec f2 = Vec::NullaryExpr(2, [&] { return 100.0 * u(rng); });
    const double a = u(rng), b = u(rng);
    const Vec lhs = eval_rhs_flat(m, a * y1 + b * y2, a * f1 + b * f2);
    const Vec rhs = a * eval_rhs_flat(m, y1, f1) + b * eval_rhs_flat(m, y2, f2);
    CHECK((lhs - rhs).norm() <= 1e-13 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("property: Bouc-Wen rate is odd for eta = 1") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const BoucWen bw;
  for (int trial = 0; trial < 100; ++trial) {
    const double v = u(rng), z = 0.5 * u(rng);
    CHECK(bouc_wen_rate(bw, -v, -z) == doctest::Approx(-bouc_wen_rate(bw, v, z)).epsilon(1e-14));
  }
}

TEST_CASE("rhs_jacobian matches central differences") {
  BoucWen bw;
  bw.Q_y = 12.0;
  const SystemModel m = make_chain_model(vec({5, 20}), vec({1000, 2000}), vec({7.5, 20}), bw);
  Vec y(5);
  y << 0.01, -0.02, 0.3, -0.4, 0.005;
  const Mat j = rhs_jacobian(m, y);
  const double h = 1e-7;
  for (Eigen::Index c = 0; c < y.size(); ++c) {
    Vec yp = y, ym = y;
    yp(c) += h;
    ym(c) -= h;
    const Vec fd = (eval_rhs_flat(m, yp, Vec::Zero(2)) - eval_rhs_flat(m, ym, Vec::Zero(2))) / (2.0 * h);
    CHECK((j.col(c) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("errors") {
  const SystemModel m = case_i_true();
  CHECK_THROWS_AS(eval_rhs_flat(m, Vec::Zero(4), Vec::Zero(3)), std::invalid_argument);
  SystemModel singular = m;
  singular.mass(1, 1) = 0.0;
  CHECK_THROWS(singular.validate());
  const SystemModel sdof = make_chain_model(vec({10}), vec({100}), vec({2.5}));
  CHECK_THROWS(true_residual(m, sdof, AugmentedState::zero(m)));
}
