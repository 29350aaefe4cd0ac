#include <cmath>

#include "doctest.h"
#include "graybox/sde_sim.hpp"
#include "test_helpers.hpp"

using namespace graybox;

namespace {

TimeSeries zero_forcing(std::size_t n, std::size_t count, double dt) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label("force", i));
  return TimeSeries(dt, labels, Mat::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n)));
}

TimeSeries band_forcing(std::size_t count, double dt) {
  Mat f(static_cast<Eigen::Index>(count), 2);
  for (Eigen::Index k = 0; k < f.rows(); ++k) {
    const double t = static_cast<double>(k) * dt;
    f(k, 0) = 20.0 * std::sin(7.0 * t) + 5.0 * std::sin(19.0 * t);
    f(k, 1) = 10.0 * std::cos(3.0 * t);
  }
  return TimeSeries(dt, {"force_1", "force_2"}, f);
}

SystemModel case_i_true(double sigma) {
  return make_chain_model(vec({30, 15}), vec({1000, 1000}), vec({10, 5}), DuffingChain{100.0}, Vec::Constant(2, sigma));
}

}  // namespace

TEST_CASE("noise-free undamped oscillator tracks cos(t)") {
  const SystemModel m = make_chain_model(vec({1}), vec({1}), vec({0}));
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.duration = 10.0;
  cfg.initial_displacement = vec({1.0});
  const TimeSeries out = simulate_taylor15(m, zero_forcing(1, 10001, cfg.dt), cfg);
  double err = 0.0;
  for (std::size_t k = 0; k < out.length(); ++k)
    err = std::max(err, std::abs(out.channel("disp_1")(static_cast<Eigen::Index>(k)) - std::cos(out.time(k))));
  CHECK(err <= 1e-4);
  CHECK(out.has_channel("vel_1"));
  CHECK(out.has_channel("acc_1"));
}

TEST_CASE("Bouc-Wen output carries the hysteretic channel") {
  BoucWen bw;
  bw.Q_y = 10.0;
  const SystemModel m = make_chain_model(vec({5, 20}), vec({1000, 2000}), vec({7.5, 20}), bw, Vec::Constant(2, 0.01));
  SimConfig cfg;
  cfg.duration = 2.0;
  const TimeSeries out = simulate_taylor15(m, band_forcing(400, cfg.dt), cfg);
  CHECK(out.has_channel("z"));
  CHECK(out.channel("z").cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("property: stationary variance of an Ornstein-Uhlenbeck velocity") {
  // m v' = -c v + sigma W' gives Var(v) = sigma^2 / (2 c m) for m = 1.
  const double theta = 1.0, sigma = 0.5;
  const SystemModel m = make_chain_model(vec({1}), vec({0}), vec({theta}), NoNonlinearity{}, vec({sigma}));
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.duration = 10000.0;
  cfg.seed = 17;
  const std::size_t count = sample_count(cfg.duration, cfg.dt);
  const TimeSeries out = simulate_taylor15(m, zero_forcing(1, count, cfg.dt), cfg);
  const Vec v = out.channel("vel_1").tail(static_cast<Eigen::Index>(count) - 1000);
  const double var = (v.array() - v.mean()).square().mean();
  CHECK(var == doctest::Approx(sigma * sigma / (2.0 * theta)).epsilon(0.05));
}

TEST_CASE("property: mechanical energy of a damped linear system never increases") {
  const SystemModel m = make_chain_model(vec({30, 15}), vec({900, 850}), vec({12, 4.5}));
  SimConfig cfg;
  cfg.duration = 20.0;
  cfg.substeps = 5;
  cfg.initial_displacement = vec({0.05, -0.03});
  cfg.initial_velocity = vec({0.2, 0.1});
  const TimeSeries out = simulate_taylor15(m, zero_forcing(2, 4000, cfg.dt), cfg);
  auto energy = [&](std::size_t k) {
    const Vec x = out.select_prefix("disp").sample(k);
    const Vec v = out.select_prefix("vel").sample(k);
    return 0.5 * v.dot(m.mass * v) + 0.5 * x.dot(m.stiffness * x);
  };
  const double e0 = energy(0);
  double worst = -1.0;
  for (std::size_t k = 1; k < out.length(); ++k) worst = std::max(worst, (energy(k) - energy(k - 1)) / e0);
  CHECK(worst <= 1e-9);
}

TEST_CASE("property: identical inputs give identical output") {
  SimConfig cfg;
  cfg.duration = 5.0;
  cfg.seed = 42;
  cfg.substeps = 3;
  const TimeSeries f = band_forcing(1000, cfg.dt);
  const TimeSeries a = simulate_taylor15(case_i_true(0.05), f, cfg);
  const TimeSeries b = simulate_taylor15(case_i_true(0.05), f, cfg);
  CHECK(a.values() == b.values());
  cfg.seed = 43;
  CHECK(simulate_taylor15(case_i_true(0.05), f, cfg).values() != a.values());
}

TEST_CASE("divergence is reported with the failing step") {
  const SystemModel m = make_chain_model(vec({1}), vec({-100}), vec({0}));
  SimConfig cfg;
  cfg.duration = 10.0;
  cfg.blowup_bound = 10.0;
  cfg.initial_displacement = vec({1.0});
  try {
    simulate_taylor15(m, zero_forcing(1, 2000, cfg.dt), cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 2000);
  }
}

TEST_CASE("synthesize_measurements") {
  SUBCASE("zero noise reproduces the simulated channels") {
    SimConfig cfg;
    cfg.duration = 2.0;
    cfg.measured = {Measured::Acceleration, Measured::Displacement};
    cfg.measurement_noise_std = vec({0.0});
    const TimeSeries f = band_forcing(400, cfg.dt);
    const TimeSeries states = simulate_taylor15(case_i_true(0.05), f, cfg);
    const TimeSeries meas = synthesize_measurements(states, case_i_true(0.05), f, cfg);
    CHECK(meas.labels() == std::vector<std::string>{"acc_1", "acc_2", "disp_1", "disp_2", "force_1", "force_2"});
    CHECK(meas.select({"acc_1", "acc_2", "disp_1", "disp_2"}).values() ==
          states.select({"acc_1", "acc_2", "disp_1", "disp_2"}).values());
    CHECK(meas.select_prefix("force").values() == f.values());
  }
  SUBCASE("noise std is realized within 2 percent") {
    const std::size_t count = 100000;
    const double s = 0.3;
    SimConfig cfg;
    cfg.seed = 9;
    cfg.measurement_noise_std = vec({s});
    TimeSeries states(cfg.dt, {"disp_1", "vel_1", "acc_1"}, Mat::Zero(static_cast<Eigen::Index>(count), 3));
    const SystemModel m = make_chain_model(vec({1}), vec({1}), vec({0}));
    const TimeSeries meas = synthesize_measurements(states, m, zero_forcing(1, count, cfg.dt), cfg);
    const Vec e = meas.channel("acc_1");
    CHECK(std::sqrt((e.array() - e.mean()).square().mean()) == doctest::Approx(s).epsilon(0.02));
  }
  SUBCASE("acceleration-only setup gives two accelerations and two input forces") {
    SimConfig cfg;
    cfg.duration = 1.0;
    cfg.measured = {Measured::Acceleration};
    const TimeSeries f = band_forcing(200, cfg.dt);
    const TimeSeries states = simulate_taylor15(case_i_true(0.05), f, cfg);
    const TimeSeries meas = synthesize_measurements(states, case_i_true(0.05), f, cfg);
    CHECK(meas.labels() == std::vector<std::string>{"acc_1", "acc_2", "force_1", "force_2"});
  }
  SUBCASE("unavailable channel") {
    SimConfig cfg;
    cfg.measured = {Measured::Displacement};
    TimeSeries states(cfg.dt, {"vel_1", "acc_1"}, Mat::Zero(10, 2));
    const SystemModel m = make_chain_model(vec({1}), vec({1}), vec({0}));
    CHECK_THROWS(synthesize_measurements(states, m, zero_forcing(1, 10, cfg.dt), cfg));
  }
}

TEST_CASE("SimConfig validation") {
  SimConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = SimConfig{};
  cfg.duration = 0.001;
  CHECK_THROWS(cfg.validate());
  cfg = SimConfig{};
  cfg.measurement_noise_std = vec({-1.0});
  CHECK_THROWS(cfg.validate());
}
