#include "graybox/timeseries.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace graybox {

Mat psd_sqrt(const Mat& cov) {
  const Mat sym = symmetrized(cov);
  Eigen::LLT<Mat> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigen decomposition failed");
  Vec values = eig.eigenvalues();
  const double top = std::max(values.maxCoeff(), 0.0);
  const double floor = top > 0.0 ? 1e-12 * top : 1e-300;
  values = values.cwiseMax(floor);
  const Mat repaired = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  Eigen::LLT<Mat> retry(symmetrized(repaired));
  if (retry.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: covariance is not repairable");
  return retry.matrixL();
}

double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool all_finite(const Mat& m) { return m.allFinite(); }

TimeSeries::TimeSeries(double dt, std::vector<std::string> labels, Mat values)
    : dt_(dt), labels_(std::move(labels)), values_(std::move(values)) {
  if (!(dt_ > 0.0)) throw std::invalid_argument("TimeSeries: dt must be positive");
  if (static_cast<std::size_t>(values_.cols()) != labels_.size())
    throw std::invalid_argument("TimeSeries: label count does not match channel count");
  check_labels();
}

void TimeSeries::check_labels() const {
  std::set<std::string> seen;
  for (const auto& l : labels_)
    if (!seen.insert(l).second) throw std::invalid_argument("TimeSeries: duplicate channel label '" + l + "'");
}

bool TimeSeries::has_channel(const std::string& label) const {
  for (const auto& l : labels_)
    if (l == label) return true;
  return false;
}

std::size_t TimeSeries::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  throw std::out_of_range("TimeSeries: no channel '" + label + "'");
}

Vec TimeSeries::channel(const std::string& label) const { return channel(index_of(label)); }

TimeSeries TimeSeries::select_prefix(const std::string& prefix) const {
  std::vector<std::string> picked;
  for (const auto& l : labels_)
    if (l.rfind(prefix, 0) == 0) picked.push_back(l);
  return select(picked);
}

TimeSeries TimeSeries::select(const std::vector<std::string>& labels) const {
  Mat out(values_.rows(), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = values_.col(static_cast<Eigen::Index>(index_of(labels[i])));
  TimeSeries ts(dt_, labels, std::move(out));
  ts.metadata = metadata;
  return ts;
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > length()) throw std::out_of_range("TimeSeries::slice: range exceeds record");
  TimeSeries ts(dt_, labels_,
                values_.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)));
  ts.metadata = metadata;
  return ts;
}

void TimeSeries::append_channel(const std::string& label, const Vec& values) {
  if (!labels_.empty() && static_cast<std::size_t>(values.size()) != length())
    throw std::invalid_argument("TimeSeries::append_channel: length mismatch");
  if (has_channel(label)) throw std::invalid_argument("TimeSeries: duplicate channel label '" + label + "'");
  Mat grown(values.size(), values_.cols() + 1);
  if (values_.cols() > 0) grown.leftCols(values_.cols()) = values_;
  grown.col(values_.cols()) = values;
  values_ = std::move(grown);
  labels_.push_back(label);
}

TimeSeries TimeSeries::joined(const TimeSeries& other) const {
  if (labels_.empty()) return other;
  if (other.labels_.empty()) return *this;
  if (other.length() != length()) throw std::invalid_argument("TimeSeries::joined: length mismatch");
  if (std::abs(other.dt_ - dt_) > 1e-12 * dt_) throw std::invalid_argument("TimeSeries::joined: dt mismatch");
  std::vector<std::string> labels = labels_;
  labels.insert(labels.end(), other.labels_.begin(), other.labels_.end());
  Mat values(values_.rows(), values_.cols() + other.values_.cols());
  values << values_, other.values_;
  TimeSeries ts(dt_, std::move(labels), std::move(values));
  ts.metadata = metadata;
  for (const auto& [k, v] : other.metadata) ts.metadata.emplace(k, v);
  return ts;
}

std::size_t sample_count(double duration, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_count: dt must be positive");
  return static_cast<std::size_t>(std::llround(duration / dt));
}

std::string channel_label(const std::string& prefix, std::size_t dof) {
  return prefix + "_" + std::to_string(dof + 1);
}

}  // namespace graybox
