#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/pipeline.hpp"
#include "graybox/sde_sim.hpp"
#include "graybox/signals.hpp"

namespace graybox {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& problem)
      : std::invalid_argument("config field '" + field + "': " + problem), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Chain-topology model description as written in a case file.
struct ModelSpec {
  Vec masses;
  Vec springs;
  Vec dampers;
  NonlinearityKind nonlinearity = NoNonlinearity{};
  /// When set, the Bouc-Wen Q_y is this fraction of the total weight.
  std::optional<double> qy_weight_fraction;
  double gravity = 9.81;
  Vec noise_intensity;
  NoiseMode noise_mode = NoiseMode::Additive;

  SystemModel build() const;
};

struct ForcingConfig {
  ForcingSpec spec = BandLimitedWhiteNoise{};
  Vec dof_weights;
  /// Noise specs: one realization per DOF instead of one shared excitation.
  bool independent_dofs = false;
  double duration = 0.0;
};

/// Thresholds checked by `run-case --assert`. Unset entries are skipped.
struct Assertions {
  std::optional<double> train_nrmse_max;
  std::optional<double> test_ratio_max;
  std::vector<std::string> channels{"disp", "vel"};
  std::optional<double> filter_correlation_min;
  std::optional<double> filter_nrmse_max;
  bool train_improves = true;
};

struct CaseConfig {
  std::string name;
  std::uint64_t seed = 0;
  ModelSpec true_model;
  ModelSpec known_model;
  ForcingConfig forcing_train;
  ForcingConfig forcing_test;
  SimConfig sim;
  FilterConfig filter;
  GpConfig gp;
  Assertions assertions;
  std::string output_dir = "out";
  /// Directory of the config file; relative record paths resolve against
  /// it. Not serialized.
  std::string base_dir = ".";

  void validate() const;
  /// Seeds derived from the global seed: simulation, measurement noise, GP
  /// restarts and the test-input simulation.
  SimConfig train_sim() const;
  SimConfig test_sim() const;
  GpConfig gp_config() const;
  std::string resolve(const std::string& path) const;
};

CaseConfig parse_config(const std::string& text, const std::string& base_dir = ".");
CaseConfig load_config(const std::string& path);
/// Canonical JSON text; parse(serialize(c)) == c.
std::string serialize_config(const CaseConfig& cfg);
/// FNV-1a of the canonical text, 16 hex digits.
std::string config_digest(const CaseConfig& cfg);

/// Realizes a forcing section on the simulation grid, with external record
/// paths resolved against the config directory.
TimeSeries realize_case_forcing(const CaseConfig& cfg, const ForcingConfig& forcing);

}  // namespace graybox
