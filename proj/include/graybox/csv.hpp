#pragma once

#include <cstdint>
#include <string>

#include "graybox/timeseries.hpp"

namespace graybox {

struct Provenance {
  std::string config_digest = "none";
  std::uint64_t seed = 0;
};

/// Writes `ts` as
///   # config_digest=<hex> seed=<u64> dt=<seconds> [key=value ...]
///   time,<label>,...
///   <rows>
/// Values use 17 significant digits so that reading back is lossless.
/// Metadata entries are appended to the comment line; keys and values must
/// not contain whitespace.
void write_csv(const std::string& path, const TimeSeries& ts, const Provenance& provenance);

/// Reads a file produced by write_csv. The comment line is optional; without
/// it dt is taken from the first two time stamps. Comment keys become
/// metadata.
TimeSeries read_csv(const std::string& path);

std::string format_double(double value);

}  // namespace graybox
