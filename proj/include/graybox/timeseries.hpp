#pragma once

#include <map>
#include <string>
#include <vector>

#include "graybox/linalg.hpp"

namespace graybox {

/// Uniformly sampled multichannel signal. Samples are rows, channels are
/// columns; sample k sits at time k * dt.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(double dt, std::vector<std::string> labels, Mat values);

  double dt() const { return dt_; }
  std::size_t length() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t channels() const { return labels_.size(); }
  double time(std::size_t k) const { return static_cast<double>(k) * dt_; }

  const std::vector<std::string>& labels() const { return labels_; }
  const Mat& values() const { return values_; }
  Mat& values() { return values_; }

  bool has_channel(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;
  Vec channel(const std::string& label) const;
  Vec channel(std::size_t index) const { return values_.col(static_cast<Eigen::Index>(index)); }
  Vec sample(std::size_t k) const { return values_.row(static_cast<Eigen::Index>(k)).transpose(); }

  /// Channels whose label starts with `prefix`, in stored order.
  TimeSeries select_prefix(const std::string& prefix) const;
  TimeSeries select(const std::vector<std::string>& labels) const;
  /// Samples [first, first + count).
  TimeSeries slice(std::size_t first, std::size_t count) const;

  void append_channel(const std::string& label, const Vec& values);
  /// Column-wise concatenation; dt and length must agree.
  TimeSeries joined(const TimeSeries& other) const;

  std::map<std::string, std::string> metadata;

 private:
  void check_labels() const;

  double dt_ = 0.0;
  std::vector<std::string> labels_;
  Mat values_;
};

/// Number of samples of a record of `duration` seconds sampled at `dt`.
std::size_t sample_count(double duration, double dt);

/// Channel label helpers: "disp_1", "vel_1", ... (1-based DOF numbering).
std::string channel_label(const std::string& prefix, std::size_t dof);

}  // namespace graybox
