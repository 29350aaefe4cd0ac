#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "graybox/gpr.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace graybox;

namespace {

const KernelFamily kAllKernels[] = {KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52};

Mat random_inputs(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return Mat::NullaryExpr(n, d, [&] { return u(rng); });
}

EstimateSeries synthetic_estimates(std::size_t n_dof, std::size_t count) {
  EstimateSeries est;
  est.dt = 0.005;
  const auto s = static_cast<Eigen::Index>(2 * n_dof);
  const auto f = static_cast<Eigen::Index>(n_dof);
  for (std::size_t k = 0; k < count; ++k) {
    Vec state(s), force(f);
    for (Eigen::Index i = 0; i < s; ++i) state(i) = 100.0 * static_cast<double>(i) + static_cast<double>(k);
    for (Eigen::Index i = 0; i < f; ++i) force(i) = -static_cast<double>(k) - 0.5 * static_cast<double>(i);
    est.state_mean.push_back(state);
    est.state_cov.push_back(Mat::Identity(s, s));
    est.force_mean.push_back(force);
    est.force_cov.push_back(Mat::Identity(f, f));
  }
  return est;
}

}  // namespace

TEST_CASE("noise-free interpolation at training points") {
  std::mt19937_64 rng(1);
  const Mat x = random_inputs(rng, 15, 2, 2.0);
  const Vec y = x.col(0).array().sin() + x.col(1).array().square();
  for (const auto family : kAllKernels) {
    const GpModel gp = GpModel::condition(Kernel{family, 2.0, vec({0.7, 0.9})}, MeanFunction{}, 0.0, x, y);
    const auto [mean, cov] = gp.predict(x);
    CHECK((mean - y).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(cov.diagonal().maxCoeff() <= 1e-8 * 2.0);
  }
}

TEST_CASE("prior reversion far from the data") {
  std::mt19937_64 rng(2);
  const Mat x = random_inputs(rng, 10, 1, 1.0);
  const Vec y = x.col(0).array().cos();
  const GpModel gp =
      GpModel::condition(Kernel{KernelFamily::SquaredExponential, 1.5, vec({0.2})}, MeanFunction{MeanFamily::Constant, 0.7},
                         1e-4, x, y);
  Mat q(2, 1);
  q << 1.0 + 20.0 * 0.2 + 0.01, -1.0 - 30.0 * 0.2;
  const auto [mean, cov] = gp.predict(q);
  CHECK((mean.array() - 0.7).abs().maxCoeff() <= 1e-6);
  CHECK((cov.diagonal().array() - 1.5).abs().maxCoeff() <= 1e-6);
}

TEST_CASE("three-point posterior against the explicit-inverse formula") {
  Mat x(3, 1);
  x << 0.0, 0.4, 1.1;
  const Vec y = vec({1.0, -0.5, 0.25});
  Mat q(5, 1);
  q << -0.3, 0.2, 0.4, 0.8, 1.5;
  const GpModel gp = GpModel::condition(Kernel{KernelFamily::SquaredExponential, 0.8, vec({0.5})},
                                        MeanFunction{MeanFamily::Constant, -0.1}, 1e-2, x, y);
  const auto [mean, cov] = gp.predict(q);
  const auto ref = oracle::dense_gp(x, y, q, 0.8, vec({0.5}), 1e-2, -0.1);
  CHECK((mean - ref.mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((cov - ref.cov).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(gp.predict_mean(q) == mean);
  for (Eigen::Index i = 0; i < q.rows(); ++i) CHECK(gp.predict_mean_at(q.row(i).transpose()) == doctest::Approx(mean(i)).epsilon(1e-13));
}

TEST_CASE("kernel closed forms") {
  const Vec a = vec({0.3, -0.2}), b = vec({-0.1, 0.4});
  const Vec l = vec({0.5, 2.0});
  const double r = std::sqrt(std::pow(0.4 / 0.5, 2) + std::pow(0.6 / 2.0, 2));
  CHECK(Kernel{KernelFamily::SquaredExponential, 2.0, l}(a, b) == doctest::Approx(oracle::se_kernel(a, b, 2.0, l)));
  CHECK(Kernel{KernelFamily::Matern32, 2.0, l}(a, b) ==
        doctest::Approx(2.0 * (1.0 + std::sqrt(3.0) * r) * std::exp(-std::sqrt(3.0) * r)));
  CHECK(Kernel{KernelFamily::Matern52, 2.0, l}(a, b) ==
        doctest::Approx(2.0 * (1.0 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r)));
  CHECK_THROWS(Kernel{KernelFamily::SquaredExponential, -1.0, l}.validate());
  CHECK_THROWS(Kernel{KernelFamily::SquaredExponential, 1.0, vec({1.0, 0.0})}.validate());
}

TEST_CASE("log-likelihood gradient matches central differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Mat x = random_inputs(rng, 25, 3, 1.5);
  const Vec y = (x.col(0).array() * 2.0).sin() + 0.3 * x.col(1).array() * x.col(2).array();
  for (const auto family : kAllKernels) {
    for (const auto mean : {MeanFamily::Zero, MeanFamily::Constant}) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto p = static_cast<Eigen::Index>(hyperparameter_count(3, mean));
        Vec theta(p);
        for (Eigen::Index i = 0; i < p; ++i) theta(i) = 0.5 * u(rng);
        theta(4) = -4.0 + u(rng);
        Vec grad;
        log_marginal_likelihood(family, mean, theta, x, y, &grad);
        Vec fd(p);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < p; ++i) {
          Vec tp = theta, tm = theta;
          tp(i) += h;
          tm(i) -= h;
          fd(i) = (log_marginal_likelihood(family, mean, tp, x, y) - log_marginal_likelihood(family, mean, tm, x, y)) /
                  (2.0 * h);
        }
        CHECK((grad - fd).cwiseAbs().maxCoeff() <= 1e-5 * fd.cwiseAbs().maxCoeff());
      }
    }
  }
}

TEST_CASE("property: posterior variance is non-negative") {
  std::mt19937_64 rng(4);
  for (const auto family : kAllKernels) {
    const Mat x = random_inputs(rng, 40, 2, 1.0);
    const Vec y = x.rowwise().sum();
    const GpModel gp = GpModel::condition(Kernel{family, 1.0, vec({0.4, 0.4})}, MeanFunction{}, 1e-8, x, y);
    const Mat q = random_inputs(rng, 100, 2, 1.5);
    CHECK(gp.predict(q).second.diagonal().minCoeff() >= 0.0);
    CHECK(gp.predict(x).second.diagonal().minCoeff() >= 0.0);
  }
}

TEST_CASE("property: adding a training point never increases posterior variance") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat x = random_inputs(rng, 8, 1, 2.0);
    const Vec y = x.col(0).array().sin();
    const Mat extra = random_inputs(rng, 1, 1, 2.0);
    Mat x2(9, 1);
    x2 << x, extra;
    Vec y2(9);
    y2 << y, 0.3;
    const Kernel k{kAllKernels[trial % 3], 1.0, vec({0.6})};
    const GpModel a = GpModel::condition(k, MeanFunction{}, 1e-6, x, y);
    const GpModel b = GpModel::condition(k, MeanFunction{}, 1e-6, x2, y2);
    const Mat q = random_inputs(rng, 50, 1, 3.0);
    CHECK((b.predict(q).second.diagonal() - a.predict(q).second.diagonal()).maxCoeff() <= 1e-8);
  }
}

TEST_CASE("property: kernel matrices factor with small jitter") {
  std::mt19937_64 rng(6);
  for (const auto family : kAllKernels) {
    for (int trial = 0; trial < 5; ++trial) {
      const Mat x = random_inputs(rng, 60, 3, 1.0);
      const Kernel k{family, 1.7, vec({0.5, 0.8, 1.2})};
      const Mat kxx = k.matrix(x, x);
      CHECK((kxx - kxx.transpose()).cwiseAbs().maxCoeff() == 0.0);
      const GpModel gp = GpModel::condition(k, MeanFunction{}, 0.0, x, Vec::Zero(60));
      CHECK(gp.jitter() <= 1e-6 * 1.7);
    }
  }
}

TEST_CASE("property: posterior mean is linear in the targets") {
  std::mt19937_64 rng(7);
  const Mat x = random_inputs(rng, 30, 2, 1.0);
  const Vec y1 = random_inputs(rng, 30, 1, 1.0).col(0);
  const Vec y2 = random_inputs(rng, 30, 1, 1.0).col(0);
  const Kernel k{KernelFamily::Matern52, 1.0, vec({0.5, 0.5})};
  const Mat q = random_inputs(rng, 40, 2, 1.2);
  const double a = 1.7, b = -0.6;
  const Vec lhs = GpModel::condition(k, MeanFunction{}, 1e-4, x, a * y1 + b * y2).predict_mean(q);
  const Vec rhs = a * GpModel::condition(k, MeanFunction{}, 1e-4, x, y1).predict_mean(q) +
                  b * GpModel::condition(k, MeanFunction{}, 1e-4, x, y2).predict_mean(q);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("fit: all-zero targets") {
  std::mt19937_64 rng(8);
  const Mat x = random_inputs(rng, 30, 2, 1.0);
  GpFitOptions opt;
  opt.restarts = 3;
  const GpModel gp = fit(x, Vec::Zero(30), KernelFamily::SquaredExponential, MeanFamily::Zero, opt);
  CHECK(gp.predict_mean(random_inputs(rng, 10, 2, 2.0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gp.kernel().signal_var == doctest::Approx(1e-6).epsilon(1e-3));
}

TEST_CASE("fit: lengthscale recovery from SE draws") {
  const double true_l = 0.3;
  std::vector<double> log_ls;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat x(50, 1);
    for (Eigen::Index i = 0; i < 50; ++i) x(i, 0) = u(rng);
    Mat cov(50, 50);
    for (Eigen::Index i = 0; i < 50; ++i)
      for (Eigen::Index j = 0; j < 50; ++j)
        cov(i, j) = oracle::se_kernel(x.row(i), x.row(j), 1.0, vec({true_l})) + (i == j ? 1e-4 : 0.0);
    const Mat lower = cov.llt().matrixL();
    const Vec y = lower * Vec::NullaryExpr(50, [&] { return normal(rng); });
    GpFitOptions opt;
    opt.restarts = 4;
    opt.seed = seed;
    log_ls.push_back(std::log(fit(x, y, KernelFamily::SquaredExponential, MeanFamily::Zero, opt).kernel().lengthscales(0)));
  }
  std::nth_element(log_ls.begin(), log_ls.begin() + 5, log_ls.end());
  const double upper = log_ls[5];
  std::nth_element(log_ls.begin(), log_ls.begin() + 4, log_ls.end());
  const double median = 0.5 * (log_ls[4] + upper);
  CHECK(std::abs(median - std::log(true_l)) <= 0.5);
}

TEST_CASE("fit: identical seeds give identical models, serial or parallel") {
  std::mt19937_64 rng(9);
  const Mat x = random_inputs(rng, 40, 2, 1.0);
  const Vec y = (3.0 * x.col(0).array()).sin() + x.col(1).array();
  GpFitOptions opt;
  opt.restarts = 4;
  opt.seed = 5;
  const GpModel a = fit(x, y, KernelFamily::Matern32, MeanFamily::Constant, opt);
  opt.parallel = false;
  const GpModel b = fit(x, y, KernelFamily::Matern32, MeanFamily::Constant, opt);
  CHECK(a.kernel().lengthscales == b.kernel().lengthscales);
  CHECK(a.noise_var() == b.noise_var());
  CHECK(a.log_likelihood() >= log_marginal_likelihood(KernelFamily::Matern32, MeanFamily::Constant,
                                                       Vec::Zero(5), x, y) - 1e-9);
}

TEST_CASE("fit: invalid input") {
  CHECK_THROWS(fit(Mat::Zero(1, 1), Vec::Zero(1), KernelFamily::SquaredExponential, MeanFamily::Zero));
  Mat x = Mat::Zero(3, 1);
  x(1, 0) = std::nan("");
  CHECK_THROWS(fit(x, Vec::Zero(3), KernelFamily::SquaredExponential, MeanFamily::Zero));
  const GpModel gp = GpModel::condition(Kernel{KernelFamily::SquaredExponential, 1.0, vec({1.0})}, MeanFunction{}, 1e-6,
                                        Mat::Zero(2, 1), Vec::Zero(2));
  CHECK_THROWS(gp.predict(Mat::Zero(3, 2)));
}

TEST_CASE("feature selection") {
  SUBCASE("default spec on 2 DOFs uses all four states") {
    const EstimateSeries est = synthetic_estimates(2, 100);
    const FeatureSelection sel = select_features(est, FeatureSpec{}, 1, 0, 100, 1, 0);
    CHECK(sel.x.cols() == 4);
    CHECK(sel.x.rows() == 100);
    CHECK(sel.y(7) == est.force_mean[7](1));
  }
  SUBCASE("chain neighbourhood of the third DOF in a 5-DOF chain") {
    FeatureSpec spec;
    spec.mode = FeatureSpec::Mode::ChainNeighborhood;
    spec.radius = 1;
    CHECK(spec.state_indices(2, 5) == std::vector<std::size_t>{1, 2, 3, 6, 7, 8});
    CHECK(spec.state_indices(0, 5) == std::vector<std::size_t>{0, 1, 5, 6});
    const EstimateSeries est = synthetic_estimates(5, 10);
    const FeatureSelection sel = select_features(est, spec, 2, 0, 10, 1, 0);
    CHECK(sel.x(3, 0) == est.state_mean[3](1));
    CHECK(sel.x(3, 5) == est.state_mean[3](8));
  }
  SUBCASE("stride 10 over 40 s at 200 Hz") {
    const EstimateSeries est = synthetic_estimates(2, 8000);
    const FeatureSelection sel = select_features(est, FeatureSpec{}, 0, 0, 8000, 10, 0);
    CHECK(sel.x.rows() == 800);
    CHECK(sel.samples[1] == 10);
    CHECK(select_features(est, FeatureSpec{}, 0, 0, 8000, 10, 600).x.rows() <= 600);
  }
  SUBCASE("empty feature set") {
    FeatureSpec spec;
    spec.mode = FeatureSpec::Mode::Explicit;
    spec.dofs = {{0}, {}};
    CHECK_THROWS(spec.state_indices(1, 2));
  }
}

TEST_CASE("model files round trip") {
  std::mt19937_64 rng(10);
  const Mat x = random_inputs(rng, 20, 2, 1.0);
  const Vec y = x.col(0) - x.col(1);
  const GpModel a = GpModel::condition(Kernel{KernelFamily::Matern52, 1.3, vec({0.4, 0.9})},
                                       MeanFunction{MeanFamily::Constant, 0.2}, 1e-3, x, y);
  const GpModel b = GpModel::condition(Kernel{KernelFamily::SquaredExponential, 0.5, vec({1.0, 2.0})}, MeanFunction{},
                                       1e-5, x, -y);
  const auto path = std::filesystem::temp_directory_path() / "graybox_gp_models.txt";
  save_models(path.string(), {a, b}, "# test");
  const auto back = load_models(path.string());
  REQUIRE(back.size() == 2);
  const Mat q = random_inputs(rng, 15, 2, 1.5);
  CHECK(back[0].predict(q).first == a.predict(q).first);
  CHECK(back[1].predict(q).second == b.predict(q).second);
  CHECK(back[0].training_digest() == a.training_digest());
  CHECK(back[0].kernel().family == KernelFamily::Matern52);
  CHECK(back[0].mean().B == 0.2);
}
