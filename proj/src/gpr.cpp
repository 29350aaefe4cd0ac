#include "graybox/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "graybox/bounded_bfgs.hpp"
#include "graybox/csv.hpp"

namespace graybox {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kSqrt5 = std::sqrt(5.0);

// Unit-variance kernel profile as a function of the scaled distance r.
double profile(KernelFamily family, double r2) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return std::exp(-0.5 * r2);
    case KernelFamily::Matern32: {
      const double r = std::sqrt(r2);
      return (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    }
    case KernelFamily::Matern52: {
      const double r = std::sqrt(r2);
      return (1.0 + kSqrt5 * r + 5.0 * r2 / 3.0) * std::exp(-kSqrt5 * r);
    }
  }
  return 0.0;
}

// d k / d log l_d = s^2 * lengthscale_factor(r) * r_d^2.
double lengthscale_factor(KernelFamily family, double r2) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return std::exp(-0.5 * r2);
    case KernelFamily::Matern32:
      return 3.0 * std::exp(-kSqrt3 * std::sqrt(r2));
    case KernelFamily::Matern52: {
      const double r = std::sqrt(r2);
      return 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
    }
  }
  return 0.0;
}

// Cholesky of k + noise I, adding jitter up to 1e-4 * s^2 when needed.
bool factorize(const Mat& k, double signal_var, Eigen::LLT<Mat>& llt, double& jitter) {
  const auto n = k.rows();
  jitter = 0.0;
  llt.compute(k);
  if (llt.info() == Eigen::Success) return true;
  for (double j = 1e-10 * signal_var; j <= 1e-4 * signal_var * (1.0 + 1e-12); j *= 10.0) {
    llt.compute(k + j * Mat::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      jitter = j;
      return true;
    }
  }
  return false;
}

struct Unpacked {
  Kernel kernel;
  MeanFunction mean;
  double noise = 0.0;
};

Unpacked unpack(KernelFamily family, MeanFamily mean, const Vec& theta, std::size_t dim) {
  if (static_cast<std::size_t>(theta.size()) != hyperparameter_count(dim, mean))
    throw std::invalid_argument("hyperparameter vector has wrong length");
  const auto d = static_cast<Eigen::Index>(dim);
  Unpacked u;
  u.kernel.family = family;
  u.kernel.signal_var = std::exp(theta(0));
  u.kernel.lengthscales = theta.segment(1, d).array().exp();
  u.noise = std::exp(theta(1 + d));
  u.mean.family = mean;
  if (mean == MeanFamily::Constant) u.mean.B = theta(2 + d);
  return u;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

double column_std(const Mat& x, Eigen::Index c) {
  const double m = x.col(c).mean();
  return std::sqrt((x.col(c).array() - m).square().mean());
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "SquaredExponential";
    case KernelFamily::Matern32:
      return "Matern32";
    case KernelFamily::Matern52:
      return "Matern52";
  }
  return "?";
}

std::string to_string(MeanFamily family) { return family == MeanFamily::Zero ? "Zero" : "Constant"; }

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "SquaredExponential" || name == "SE") return KernelFamily::SquaredExponential;
  if (name == "Matern32") return KernelFamily::Matern32;
  if (name == "Matern52") return KernelFamily::Matern52;
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

MeanFamily mean_family_from_string(const std::string& name) {
  if (name == "Zero") return MeanFamily::Zero;
  if (name == "Constant") return MeanFamily::Constant;
  throw std::invalid_argument("unknown mean family '" + name + "'");
}

double Kernel::operator()(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) const {
  const double r2 = ((a - b).array() / lengthscales.array()).square().sum();
  return signal_var * profile(family, r2);
}

Mat Kernel::matrix(const Mat& a, const Mat& b) const {
  if (a.cols() != lengthscales.size() || b.cols() != lengthscales.size())
    throw std::invalid_argument("kernel: input dimension mismatch");
  const Mat as = a * lengthscales.cwiseInverse().asDiagonal();
  const Mat bs = b * lengthscales.cwiseInverse().asDiagonal();
  Mat k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      k(i, j) = signal_var * profile(family, (as.row(i) - bs.row(j)).squaredNorm());
  return k;
}

void Kernel::validate() const {
  if (!(signal_var > 0.0)) throw std::invalid_argument("kernel: signal variance must be positive");
  if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("kernel: lengthscales must be positive");
}

std::size_t hyperparameter_count(std::size_t input_dim, MeanFamily mean) {
  return input_dim + 2 + (mean == MeanFamily::Constant ? 1 : 0);
}

double log_marginal_likelihood(KernelFamily family, MeanFamily mean, const Vec& theta, const Mat& x, const Vec& y,
                               Vec* gradient) {
  const auto n = x.rows();
  const auto dim = x.cols();
  if (y.size() != n) throw std::invalid_argument("log_marginal_likelihood: x and y differ in length");
  const Unpacked u = unpack(family, mean, theta, static_cast<std::size_t>(dim));

  const Mat xs = x * u.kernel.lengthscales.cwiseInverse().asDiagonal();
  Mat r2(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) r2(i, j) = r2(j, i) = (xs.row(i) - xs.row(j)).squaredNorm();
  Mat kf(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) kf(i, j) = kf(j, i) = u.kernel.signal_var * profile(family, r2(i, j));

  Eigen::LLT<Mat> llt;
  double jitter = 0.0;
  if (!factorize(kf + u.noise * Mat::Identity(n, n), u.kernel.signal_var, llt, jitter))
    return -std::numeric_limits<double>::infinity();
  const Vec resid = y.array() - u.mean.value();
  const Vec alpha = llt.solve(resid);
  const Mat lower = llt.matrixL();
  const double logdet = 2.0 * lower.diagonal().array().log().sum();
  const double value =
      -0.5 * resid.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  if (gradient) {
    const Mat kinv = llt.solve(Mat::Identity(n, n));
    const Mat w = alpha * alpha.transpose() - kinv;
    Vec& g = *gradient;
    g.resize(theta.size());
    g(0) = 0.5 * (w.array() * kf.array()).sum();
    Mat factor(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j; i < n; ++i)
        factor(i, j) = factor(j, i) = u.kernel.signal_var * lengthscale_factor(family, r2(i, j));
    const Mat wf = w.cwiseProduct(factor);
    for (Eigen::Index d = 0; d < dim; ++d) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
          const double diff = xs(i, d) - xs(j, d);
          acc += wf(i, j) * diff * diff;
        }
      g(1 + d) = 0.5 * acc;
    }
    g(1 + dim) = 0.5 * u.noise * w.trace();
    if (mean == MeanFamily::Constant) g(2 + dim) = alpha.sum();
  }
  return value;
}

GpModel GpModel::condition(Kernel kernel, MeanFunction mean, double noise_var, Mat train_x, Vec train_y) {
  kernel.validate();
  if (train_x.rows() < 1 || train_x.rows() != train_y.size())
    throw std::invalid_argument("GpModel: training inputs and targets differ in length");
  if (train_x.cols() != kernel.lengthscales.size()) throw std::invalid_argument("GpModel: input dimension mismatch");
  if (!train_x.allFinite() || !train_y.allFinite()) throw std::invalid_argument("GpModel: non-finite training data");
  if (noise_var < 0.0) throw std::invalid_argument("GpModel: noise variance must be >= 0");
  GpModel m;
  m.kernel_ = std::move(kernel);
  m.mean_ = mean;
  m.noise_var_ = noise_var;
  m.train_x_ = std::move(train_x);
  m.train_y_ = std::move(train_y);
  const auto n = m.train_x_.rows();
  const Mat k = m.kernel_.matrix(m.train_x_, m.train_x_) + noise_var * Mat::Identity(n, n);
  if (!factorize(k, m.kernel_.signal_var, m.factor_, m.jitter_))
    throw std::runtime_error("GpModel: covariance is not positive definite even with jitter 1e-4 s^2");
  const Vec resid = m.train_y_.array() - m.mean_.value();
  m.alpha_ = m.factor_.solve(resid);
  const Mat lower = m.factor_.matrixL();
  m.log_likelihood_ = -0.5 * resid.dot(m.alpha_) - lower.diagonal().array().log().sum() -
                      0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return m;
}

std::pair<Vec, Mat> GpModel::predict(const Mat& query) const {
  if (static_cast<std::size_t>(query.cols()) != input_dim())
    throw std::invalid_argument("GpModel::predict: query dimension " + std::to_string(query.cols()) + " != " +
                                std::to_string(input_dim()));
  const Mat ks = kernel_.matrix(train_x_, query);
  Vec mean = (ks.transpose() * alpha_).array() + mean_.value();
  const Mat v = factor_.matrixL().solve(ks);
  Mat cov = kernel_.matrix(query, query) - v.transpose() * v;
  cov = symmetrized(cov);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) cov(i, i) = std::max(cov(i, i), 0.0);
  return {std::move(mean), std::move(cov)};
}

Vec GpModel::predict_mean(const Mat& query) const {
  if (static_cast<std::size_t>(query.cols()) != input_dim()) throw std::invalid_argument("GpModel::predict_mean: dimension mismatch");
  return (kernel_.matrix(train_x_, query).transpose() * alpha_).array() + mean_.value();
}

double GpModel::predict_mean_at(const Eigen::Ref<const Vec>& point) const {
  if (static_cast<std::size_t>(point.size()) != input_dim()) throw std::invalid_argument("GpModel::predict_mean: dimension mismatch");
  const Vec inv_l = kernel_.lengthscales.cwiseInverse();
  const Vec p = point.cwiseProduct(inv_l);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
    const double r2 = (train_x_.row(i).transpose().cwiseProduct(inv_l) - p).squaredNorm();
    acc += alpha_(i) * profile(kernel_.family, r2);
  }
  return kernel_.signal_var * acc + mean_.value();
}

std::string GpModel::training_digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  h = fnv1a(train_x_.data(), sizeof(double) * static_cast<std::size_t>(train_x_.size()), h);
  h = fnv1a(train_y_.data(), sizeof(double) * static_cast<std::size_t>(train_y_.size()), h);
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void GpModel::write(std::ostream& out) const {
  out << "kernel " << to_string(kernel_.family) << '\n';
  out << "signal_var " << format_double(kernel_.signal_var) << '\n';
  out << "lengthscales " << kernel_.lengthscales.size();
  for (Eigen::Index d = 0; d < kernel_.lengthscales.size(); ++d) out << ' ' << format_double(kernel_.lengthscales(d));
  out << '\n';
  out << "mean " << to_string(mean_.family) << ' ' << format_double(mean_.B) << '\n';
  out << "noise_var " << format_double(noise_var_) << '\n';
  out << "log_likelihood " << format_double(log_likelihood_) << '\n';
  out << "training " << train_x_.rows() << ' ' << train_x_.cols() << " digest " << training_digest() << '\n';
  for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
    for (Eigen::Index d = 0; d < train_x_.cols(); ++d) out << format_double(train_x_(i, d)) << ' ';
    out << format_double(train_y_(i)) << '\n';
  }
  out << "end\n";
}

namespace {

std::string expect_key(std::istream& in, const std::string& key) {
  std::string word;
  if (!(in >> word) || word != key) throw std::runtime_error("GP model file: expected '" + key + "', got '" + word + "'");
  return word;
}

double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("GP model file: unexpected end of input");
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("GP model file: bad number '" + token + "'");
  }
}

}  // namespace

GpModel GpModel::read(std::istream& in) {
  std::string word;
  expect_key(in, "kernel");
  in >> word;
  Kernel kernel;
  kernel.family = kernel_family_from_string(word);
  expect_key(in, "signal_var");
  kernel.signal_var = read_double(in);
  expect_key(in, "lengthscales");
  long dim = 0;
  if (!(in >> dim) || dim <= 0) throw std::runtime_error("GP model file: bad lengthscale count");
  kernel.lengthscales.resize(dim);
  for (long d = 0; d < dim; ++d) kernel.lengthscales(d) = read_double(in);
  expect_key(in, "mean");
  in >> word;
  MeanFunction mean;
  mean.family = mean_family_from_string(word);
  mean.B = read_double(in);
  expect_key(in, "noise_var");
  const double noise = read_double(in);
  expect_key(in, "log_likelihood");
  read_double(in);
  expect_key(in, "training");
  long rows = 0, cols = 0;
  std::string digest;
  if (!(in >> rows >> cols) || rows <= 0 || cols != dim) throw std::runtime_error("GP model file: bad training shape");
  expect_key(in, "digest");
  in >> digest;
  Mat x(rows, cols);
  Vec y(rows);
  for (long i = 0; i < rows; ++i) {
    for (long d = 0; d < cols; ++d) x(i, d) = read_double(in);
    y(i) = read_double(in);
  }
  expect_key(in, "end");
  GpModel m = condition(std::move(kernel), mean, noise, std::move(x), std::move(y));
  if (m.training_digest() != digest) throw std::runtime_error("GP model file: training data digest mismatch");
  return m;
}

GpModel fit(const Mat& train_x, const Vec& train_y, KernelFamily kernel, MeanFamily mean, const GpFitOptions& options) {
  const auto n = train_x.rows();
  const auto dim = train_x.cols();
  if (n < 2) throw std::invalid_argument("gp fit: need at least 2 training points");
  if (dim < 1) throw std::invalid_argument("gp fit: need at least one input dimension");
  if (train_y.size() != n) throw std::invalid_argument("gp fit: x and y differ in length");
  if (!train_x.allFinite() || !train_y.allFinite()) throw std::invalid_argument("gp fit: non-finite training data");
  if (options.restarts < 1) throw std::invalid_argument("gp fit: restarts must be >= 1");

  const double ymean = train_y.mean();
  double scale = mean == MeanFamily::Zero ? train_y.squaredNorm() / static_cast<double>(n)
                                          : (train_y.array() - ymean).square().mean();
  if (!(scale > 0.0)) scale = 1.0;
  Vec xstd(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    xstd(d) = column_std(train_x, d);
    if (!(xstd(d) > 0.0)) xstd(d) = 1.0;
  }

  const auto p = static_cast<Eigen::Index>(hyperparameter_count(static_cast<std::size_t>(dim), mean));
  Vec lo(p), hi(p);
  lo(0) = std::log(1e-6 * scale);
  hi(0) = std::log(1e4 * scale);
  for (Eigen::Index d = 0; d < dim; ++d) {
    lo(1 + d) = std::log(1e-3 * xstd(d));
    hi(1 + d) = std::log(1e3 * xstd(d));
  }
  lo(1 + dim) = std::log(std::max(options.min_noise_var, 1e-300));
  hi(1 + dim) = std::log(10.0 * scale);
  if (mean == MeanFamily::Constant) {
    const double spread = std::sqrt(scale);
    lo(2 + dim) = train_y.minCoeff() - spread;
    hi(2 + dim) = train_y.maxCoeff() + spread;
  }

  std::vector<Vec> starts;
  Vec base(p);
  base(0) = std::log(scale);
  for (Eigen::Index d = 0; d < dim; ++d) base(1 + d) = std::log(3.0 * xstd(d));
  base(1 + dim) = std::log(0.05 * scale);
  if (mean == MeanFamily::Constant) base(2 + dim) = ymean;
  starts.push_back(base.cwiseMax(lo).cwiseMin(hi));
  for (int r = 1; r < options.restarts; ++r) {
    std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec t(p);
    t(0) = std::log(scale) + (unit(rng) * 4.0 - 2.0);
    for (Eigen::Index d = 0; d < dim; ++d) t(1 + d) = std::log(xstd(d)) + (unit(rng) * 4.0 - 1.5);
    t(1 + dim) = std::log(scale) + (unit(rng) * 7.0 - 8.0);
    if (mean == MeanFamily::Constant) t(2 + dim) = ymean + (unit(rng) - 0.5) * std::sqrt(scale);
    starts.push_back(t.cwiseMax(lo).cwiseMin(hi));
  }

  const Objective objective = [&](const Vec& theta, Vec& grad) {
    Vec g;
    const double v = log_marginal_likelihood(kernel, mean, theta, train_x, train_y, &g);
    if (!std::isfinite(v)) {
      grad = Vec::Zero(theta.size());
      return std::numeric_limits<double>::infinity();
    }
    grad = -g;
    return -v;
  };
  BoxBfgsOptions bfgs;
  bfgs.max_iterations = options.max_iterations;
  bfgs.gradient_tolerance = 1e-5;
  bfgs.function_tolerance = 1e-10;

  std::vector<BoxBfgsResult> results(starts.size());
  if (options.parallel && starts.size() > 1) {
    std::vector<std::future<BoxBfgsResult>> jobs;
    for (const auto& s : starts)
      jobs.push_back(std::async(std::launch::async, [&, s] { return minimize_box_bfgs(objective, s, lo, hi, bfgs); }));
    for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) results[i] = minimize_box_bfgs(objective, starts[i], lo, hi, bfgs);
  }

  // Ordered reduction: the first start wins ties.
  std::size_t best = results.size();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!std::isfinite(results[i].value)) continue;
    if (best == results.size() || results[i].value < results[best].value) best = i;
  }
  if (best == results.size())
    throw std::runtime_error("gp fit: no restart produced a finite likelihood (" + std::to_string(results.size()) +
                             " starts, " + std::to_string(n) + " points)");
  const Unpacked u = unpack(kernel, mean, results[best].x, static_cast<std::size_t>(dim));
  return GpModel::condition(u.kernel, u.mean, u.noise, train_x, train_y);
}

std::vector<std::size_t> FeatureSpec::state_indices(std::size_t channel, std::size_t n_dof) const {
  std::vector<std::size_t> dof_list;
  switch (mode) {
    case Mode::All:
      for (std::size_t i = 0; i < n_dof; ++i) dof_list.push_back(i);
      break;
    case Mode::ChainNeighborhood: {
      const std::size_t first = channel >= radius ? channel - radius : 0;
      const std::size_t last = std::min(n_dof - 1, channel + radius);
      for (std::size_t i = first; i <= last; ++i) dof_list.push_back(i);
      break;
    }
    case Mode::Explicit:
      if (channel >= dofs.size()) throw std::invalid_argument("feature spec: no DOF list for residual channel " + std::to_string(channel + 1));
      dof_list = dofs[channel];
      break;
  }
  if (dof_list.empty()) throw std::invalid_argument("feature spec: empty feature set for residual channel " + std::to_string(channel + 1));
  std::vector<std::size_t> idx;
  for (const auto d : dof_list) {
    if (d >= n_dof) throw std::invalid_argument("feature spec: DOF index out of range");
    idx.push_back(d);
  }
  for (const auto d : dof_list) idx.push_back(n_dof + d);
  return idx;
}

FeatureSelection select_features(const EstimateSeries& estimates, const FeatureSpec& spec, std::size_t channel,
                                 std::size_t first, std::size_t count, std::size_t stride, std::size_t max_points) {
  if (estimates.length() == 0) throw std::invalid_argument("select_features: empty estimates");
  if (first + count > estimates.length()) throw std::invalid_argument("select_features: window exceeds estimates");
  if (count == 0) throw std::invalid_argument("select_features: empty window");
  const std::size_t n_dof = static_cast<std::size_t>(estimates.state_mean.front().size()) / 2;
  if (channel >= static_cast<std::size_t>(estimates.force_mean.front().size()))
    throw std::invalid_argument("select_features: residual channel out of range");
  const auto idx = spec.state_indices(channel, n_dof);
  std::size_t step = std::max<std::size_t>(stride, 1);
  if (max_points > 0) step = std::max(step, (count + max_points - 1) / max_points);
  FeatureSelection sel;
  for (std::size_t k = first; k < first + count; k += step) sel.samples.push_back(k);
  sel.x.resize(static_cast<Eigen::Index>(sel.samples.size()), static_cast<Eigen::Index>(idx.size()));
  sel.y.resize(static_cast<Eigen::Index>(sel.samples.size()));
  for (std::size_t r = 0; r < sel.samples.size(); ++r) {
    const auto k = sel.samples[r];
    for (std::size_t c = 0; c < idx.size(); ++c)
      sel.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = estimates.state_mean[k](static_cast<Eigen::Index>(idx[c]));
    sel.y(static_cast<Eigen::Index>(r)) = estimates.force_mean[k](static_cast<Eigen::Index>(channel));
  }
  return sel;
}

void save_models(const std::string& path, const std::vector<GpModel>& models, const std::string& header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_models: cannot open '" + path + "'");
  out << "# " << header_comment << '\n';
  out << "graybox-gp-models " << models.size() << '\n';
  for (std::size_t i = 0; i < models.size(); ++i) {
    out << "channel " << channel_label("res", i) << '\n';
    models[i].write(out);
  }
  if (!out) throw std::runtime_error("save_models: write failed for '" + path + "'");
}

std::vector<GpModel> load_models(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_models: cannot open '" + path + "'");
  while (in.peek() == '#') {
    std::string skip;
    std::getline(in, skip);
  }
  std::string word;
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "graybox-gp-models") throw std::runtime_error("load_models: bad header in '" + path + "'");
  std::vector<GpModel> models;
  for (std::size_t i = 0; i < count; ++i) {
    std::string label;
    if (!(in >> word >> label) || word != "channel") throw std::runtime_error("load_models: missing channel block");
    models.push_back(GpModel::read(in));
  }
  return models;
}

}  // namespace graybox
