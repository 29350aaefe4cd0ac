#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "graybox/filters.hpp"
#include "graybox/linalg.hpp"

namespace graybox {

enum class KernelFamily { SquaredExponential, Matern32, Matern52 };
enum class MeanFamily { Zero, Constant };

std::string to_string(KernelFamily family);
std::string to_string(MeanFamily family);
KernelFamily kernel_family_from_string(const std::string& name);
MeanFamily mean_family_from_string(const std::string& name);

/// Stationary ARD kernel s^2 * g(r), r^2 = sum_d ((a_d - b_d) / l_d)^2.
struct Kernel {
  KernelFamily family = KernelFamily::SquaredExponential;
  double signal_var = 1.0;
  Vec lengthscales;

  double operator()(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) const;
  /// Rows of `a` against rows of `b`.
  Mat matrix(const Mat& a, const Mat& b) const;
  void validate() const;
};

struct MeanFunction {
  MeanFamily family = MeanFamily::Zero;
  double B = 0.0;
  double value() const { return family == MeanFamily::Constant ? B : 0.0; }
};

struct GpFitOptions {
  int restarts = 8;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  bool parallel = true;
  double min_noise_var = 1e-10;
};

/// Exact GP regression on one output channel.
class GpModel {
 public:
  GpModel() = default;

  /// Conditions on (x, y) with fixed hyperparameters.
  static GpModel condition(Kernel kernel, MeanFunction mean, double noise_var, Mat train_x, Vec train_y);

  const Kernel& kernel() const { return kernel_; }
  const MeanFunction& mean() const { return mean_; }
  double noise_var() const { return noise_var_; }
  /// Diagonal jitter that had to be added on top of noise_var.
  double jitter() const { return jitter_; }
  const Mat& train_x() const { return train_x_; }
  const Vec& train_y() const { return train_y_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(train_x_.cols()); }
  double log_likelihood() const { return log_likelihood_; }

  /// Posterior mean and covariance at the rows of `query`.
  std::pair<Vec, Mat> predict(const Mat& query) const;
  Vec predict_mean(const Mat& query) const;
  double predict_mean_at(const Eigen::Ref<const Vec>& point) const;

  void write(std::ostream& out) const;
  static GpModel read(std::istream& in);
  /// FNV-1a over the bit patterns of the training arrays.
  std::string training_digest() const;

 private:
  Kernel kernel_;
  MeanFunction mean_;
  double noise_var_ = 0.0;
  double jitter_ = 0.0;
  Mat train_x_;
  Vec train_y_;
  Eigen::LLT<Mat> factor_;
  Vec alpha_;
  double log_likelihood_ = 0.0;
};

/// Log-parameter layout: [log s^2, log l_1 .. log l_D, log noise_var, B?].
/// B is present (untransformed) only for the constant mean.
std::size_t hyperparameter_count(std::size_t input_dim, MeanFamily mean);

/// Log marginal likelihood at `theta` and, when `gradient` is non-null, its
/// gradient with respect to theta.
double log_marginal_likelihood(KernelFamily family, MeanFamily mean, const Vec& theta, const Mat& x, const Vec& y,
                               Vec* gradient = nullptr);

/// Multi-start maximum-likelihood fit.
GpModel fit(const Mat& train_x, const Vec& train_y, KernelFamily kernel, MeanFamily mean,
            const GpFitOptions& options = {});

/// Which estimated states feed each residual channel.
struct FeatureSpec {
  enum class Mode { All, ChainNeighborhood, Explicit };
  Mode mode = Mode::All;
  std::size_t radius = 1;                             // ChainNeighborhood
  std::vector<std::vector<std::size_t>> dofs;         // Explicit: 0-based DOFs per residual channel

  /// Indices into the state vector [x_1..x_n, v_1..v_n]: displacements of
  /// the selected DOFs followed by their velocities.
  std::vector<std::size_t> state_indices(std::size_t channel, std::size_t n_dof) const;
};

struct FeatureSelection {
  Mat x;
  Vec y;
  std::vector<std::size_t> samples;  // sample indices used
};

/// Training pairs for residual channel `channel` from samples
/// [first, first + count), taking every stride-th sample. The stride is
/// raised if needed so that at most max_points pairs are returned.
FeatureSelection select_features(const EstimateSeries& estimates, const FeatureSpec& spec, std::size_t channel,
                                 std::size_t first, std::size_t count, std::size_t stride, std::size_t max_points);

/// Multi-channel model file: a header line with the channel count, then one
/// labelled block per channel.
void save_models(const std::string& path, const std::vector<GpModel>& models, const std::string& header_comment);
std::vector<GpModel> load_models(const std::string& path);

}  // namespace graybox
