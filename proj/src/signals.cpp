#include "graybox/signals.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace graybox {

namespace {

void check_band(const BandLimitedWhiteNoise& spec, double dt) {
  const double nyquist = 0.5 / dt;
  if (!(spec.f_lo > 0.0 && spec.f_lo < spec.f_hi && spec.f_hi < nyquist))
    throw std::invalid_argument("band-limited noise: require 0 < f_lo < f_hi < Nyquist (" + std::to_string(nyquist) +
                                " Hz)");
  if (spec.amplitude_std < 0.0) throw std::invalid_argument("band-limited noise: amplitude_std must be >= 0");
}

Vec band_limited(const BandLimitedWhiteNoise& spec, double dt, std::size_t count) {
  check_band(spec, dt);
  if (count < 16) throw std::invalid_argument("band-limited noise: need at least 16 samples");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(count);
  for (auto& w : white) w = normal(rng);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, white);
  const double df = 1.0 / (static_cast<double>(count) * dt);
  for (std::size_t j = 0; j < spectrum.size(); ++j) {
    const double f = static_cast<double>(j) * df;
    if (f < spec.f_lo || f > spec.f_hi) spectrum[j] = 0.0;
  }
  std::vector<double> shaped;
  fft.inv(shaped, spectrum, count);

  Vec out = Eigen::Map<Vec>(shaped.data(), static_cast<Eigen::Index>(count));
  const double mean = out.mean();
  const double sd = std::sqrt((out.array() - mean).square().mean());
  if (sd > 0.0) out *= spec.amplitude_std / sd;
  return out;
}

std::vector<double> parse_numbers(const std::string& line) {
  std::string cleaned = line;
  for (auto& c : cleaned)
    if (c == ',' || c == ';' || c == '\t') c = ' ';
  std::istringstream in(cleaned);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      return {};
    }
    if (used != token.size()) return {};
    values.push_back(v);
  }
  return values;
}

struct RawRecord {
  std::vector<double> time;
  std::vector<double> value;
  double original_dt = 0.0;
};

RawRecord read_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ground motion: cannot open '" + path + "'");
  RawRecord rec;
  double header_dt = 0.0;
  bool first = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const std::string body = line.substr(start);
    const auto numbers = parse_numbers(body);
    if (numbers.empty()) {
      if (!first) throw std::runtime_error("ground motion: unparseable line " + std::to_string(lineno) + " in '" + path + "'");
      first = false;
      const auto eq = body.find('=');
      if (body.rfind("dt", 0) == 0 && eq != std::string::npos) {
        try {
          header_dt = std::stod(body.substr(eq + 1));
        } catch (const std::exception&) {
          throw std::runtime_error("ground motion: bad dt header in '" + path + "'");
        }
        if (!(header_dt > 0.0)) throw std::runtime_error("ground motion: dt header must be positive");
      }
      continue;
    }
    first = false;
    if (numbers.size() >= 2) {
      rec.time.push_back(numbers[0]);
      rec.value.push_back(numbers[1]);
    } else {
      if (!(header_dt > 0.0))
        throw std::runtime_error("ground motion: single-column record without a dt header in '" + path + "'");
      rec.time.push_back(static_cast<double>(rec.value.size()) * header_dt);
      rec.value.push_back(numbers[0]);
    }
  }
  if (rec.value.empty()) throw std::runtime_error("ground motion: '" + path + "' contains no samples");
  for (std::size_t i = 1; i < rec.time.size(); ++i)
    if (!(rec.time[i] > rec.time[i - 1]))
      throw std::runtime_error("ground motion: time column is not strictly increasing in '" + path + "'");
  rec.original_dt = rec.time.size() > 1 ? (rec.time.back() - rec.time.front()) / static_cast<double>(rec.time.size() - 1)
                                        : header_dt;
  return rec;
}

Vec resample(const RawRecord& rec, double dt, std::size_t count) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(count));
  std::size_t j = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t < rec.time.front() || t > rec.time.back()) continue;
    while (j + 1 < rec.time.size() && rec.time[j + 1] <= t) ++j;
    if (rec.time[j] == t || j + 1 == rec.time.size()) {
      out(static_cast<Eigen::Index>(k)) = rec.value[j];
    } else {
      const double w = (t - rec.time[j]) / (rec.time[j + 1] - rec.time[j]);
      out(static_cast<Eigen::Index>(k)) = rec.value[j] + w * (rec.value[j + 1] - rec.value[j]);
    }
  }
  return out;
}

TimeSeries wrap_excitation(double dt, Vec values) {
  Mat m(values.size(), 1);
  m.col(0) = values;
  return TimeSeries(dt, {"excitation"}, std::move(m));
}

}  // namespace

Vec hamming_window(std::size_t count) {
  Vec w(static_cast<Eigen::Index>(count));
  if (count == 1) {
    w(0) = 1.0;
    return w;
  }
  const double denom = static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k)
    w(static_cast<Eigen::Index>(k)) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom);
  return w;
}

TimeSeries realize(const ForcingSpec& spec, double dt, double duration) {
  if (!(dt > 0.0)) throw std::invalid_argument("realize: dt must be positive");
  const std::size_t count = sample_count(duration, dt);
  if (count == 0) throw std::invalid_argument("realize: duration shorter than one sample");
  return std::visit(
      [&](const auto& s) -> TimeSeries {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BandLimitedWhiteNoise>) {
          return wrap_excitation(dt, band_limited(s, dt, count));
        } else if constexpr (std::is_same_v<T, HammingModulatedNoise>) {
          Vec v = band_limited(s.inner, dt, count);
          v.array() *= hamming_window(count).array();
          return wrap_excitation(dt, std::move(v));
        } else if constexpr (std::is_same_v<T, Sinusoid>) {
          Vec v(static_cast<Eigen::Index>(count));
          for (std::size_t k = 0; k < count; ++k)
            v(static_cast<Eigen::Index>(k)) =
                s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * static_cast<double>(k) * dt + s.phase);
          return wrap_excitation(dt, std::move(v));
        } else {
          TimeSeries ts = load_ground_motion(s.path, dt, count);
          ts.values() *= s.scale;
          return ts;
        }
      },
      spec);
}

TimeSeries realize_forcing(const ForcingSpec& spec, double dt, double duration, const Vec& dof_weights) {
  const TimeSeries base = realize(spec, dt, duration);
  Vec weights = dof_weights;
  if (const auto* ext = std::get_if<ExternalRecord>(&spec); ext && ext->dof_distribution.size() > 0)
    weights = ext->dof_distribution;
  if (weights.size() == 0) throw std::invalid_argument("realize_forcing: no DOF weights given");
  Mat values = base.values().col(0) * weights.transpose();
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < weights.size(); ++i) labels.push_back(channel_label("force", static_cast<std::size_t>(i)));
  TimeSeries ts(dt, std::move(labels), std::move(values));
  ts.metadata = base.metadata;
  return ts;
}

TimeSeries realize_forcing_independent(const ForcingSpec& spec, double dt, double duration, const Vec& dof_weights) {
  if (dof_weights.size() == 0) throw std::invalid_argument("realize_forcing: no DOF weights given");
  const BandLimitedWhiteNoise* band = std::get_if<BandLimitedWhiteNoise>(&spec);
  if (const auto* h = std::get_if<HammingModulatedNoise>(&spec)) band = &h->inner;
  if (!band) throw std::invalid_argument("realize_forcing: independent DOF realizations need a noise spec");
  std::vector<std::string> labels;
  Mat values;
  std::map<std::string, std::string> metadata;
  for (Eigen::Index i = 0; i < dof_weights.size(); ++i) {
    ForcingSpec shifted = spec;
    if (auto* b = std::get_if<BandLimitedWhiteNoise>(&shifted)) b->seed += static_cast<std::uint64_t>(i);
    if (auto* h = std::get_if<HammingModulatedNoise>(&shifted)) h->inner.seed += static_cast<std::uint64_t>(i);
    const TimeSeries base = realize(shifted, dt, duration);
    if (i == 0) {
      values.resize(base.values().rows(), dof_weights.size());
      metadata = base.metadata;
    }
    values.col(i) = dof_weights(i) * base.values().col(0);
    labels.push_back(channel_label("force", static_cast<std::size_t>(i)));
  }
  TimeSeries ts(dt, std::move(labels), std::move(values));
  ts.metadata = metadata;
  return ts;
}

TimeSeries load_ground_motion(const std::string& path, double dt_target) {
  if (!(dt_target > 0.0)) throw std::invalid_argument("load_ground_motion: dt must be positive");
  const RawRecord rec = read_record(path);
  const auto count = static_cast<std::size_t>(std::floor(rec.time.back() / dt_target + 1e-9)) + 1;
  return load_ground_motion(path, dt_target, count);
}

TimeSeries load_ground_motion(const std::string& path, double dt_target, std::size_t count) {
  if (!(dt_target > 0.0)) throw std::invalid_argument("load_ground_motion: dt must be positive");
  const RawRecord rec = read_record(path);
  TimeSeries ts = wrap_excitation(dt_target, resample(rec, dt_target, count));
  ts.metadata["source"] = path;
  std::ostringstream dt_text;
  dt_text.precision(17);
  dt_text << rec.original_dt;
  ts.metadata["source_dt"] = dt_text.str();
  return ts;
}

}  // namespace graybox
