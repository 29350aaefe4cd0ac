#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "graybox/timeseries.hpp"

namespace graybox {

struct BandLimitedWhiteNoise {
  double f_lo = 0.5;
  double f_hi = 4.0;
  double amplitude_std = 1.0;
  std::uint64_t seed = 0;
};

struct HammingModulatedNoise {
  BandLimitedWhiteNoise inner;
};

struct Sinusoid {
  double frequency = 1.0;
  double amplitude = 1.0;
  double phase = 0.0;
};

struct ExternalRecord {
  std::string path;
  double scale = 1.0;
  Vec dof_distribution;  // force on DOF i is scale * record * dof_distribution(i)
};

using ForcingSpec = std::variant<BandLimitedWhiteNoise, HammingModulatedNoise, Sinusoid, ExternalRecord>;

/// Scalar excitation realized on the grid k*dt, k < round(duration/dt).
/// Single channel labelled "excitation".
TimeSeries realize(const ForcingSpec& spec, double dt, double duration);

/// realize() spread over DOFs: channel "force_i" = weight_i * excitation.
/// ExternalRecord specs use their own dof_distribution when it is non-empty.
TimeSeries realize_forcing(const ForcingSpec& spec, double dt, double duration, const Vec& dof_weights);

/// Noise specs only: DOF i gets its own realization, seeded with seed + i,
/// scaled by weight_i.
TimeSeries realize_forcing_independent(const ForcingSpec& spec, double dt, double duration, const Vec& dof_weights);

/// w[k] = 0.54 - 0.46 cos(2 pi k / (K - 1)).
Vec hamming_window(std::size_t count);

/// Reads a ground-motion record and resamples it to dt_target by linear
/// interpolation. Accepted layouts: two numeric columns (time, value), or a
/// header line "dt=<seconds>" followed by one value per line. Lines starting
/// with '#' are skipped. Samples past the end of the record are zero.
/// Metadata records the source path and original dt.
TimeSeries load_ground_motion(const std::string& path, double dt_target);

/// Same as load_ground_motion, truncated or zero-extended to `count` samples.
TimeSeries load_ground_motion(const std::string& path, double dt_target, std::size_t count);

}  // namespace graybox
