#pragma once

#include <string>
#include <vector>

#include "graybox/config.hpp"
#include "graybox/csv.hpp"
#include "graybox/pipeline.hpp"

namespace graybox {

struct SimulationOutputs {
  TimeSeries forcing_train;
  TimeSeries forcing_test;
  TimeSeries truth_train;
  TimeSeries truth_test;
  TimeSeries measurements;
};

struct CaseRun {
  SimulationOutputs sim;
  std::string filter_used;
  EstimateSeries estimates;
  /// Ground-truth residual along the true trajectory, filter window only.
  TimeSeries true_residual;
  CorrectedModel corrected;
  TimeSeries predicted_train;
  TimeSeries predicted_test;
  TimeSeries known_train;
  TimeSeries known_test;
  RunReport filter_report;
  RunReport corrected_train_report;
  RunReport known_train_report;
  RunReport corrected_test_report;
  RunReport known_test_report;
};

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

SimulationOutputs stage_simulate(const CaseConfig& cfg);

/// Filter settings with measurement noise stds filled in from the
/// measurement record when the config leaves them empty.
FilterConfig resolved_filter_config(const CaseConfig& cfg, const TimeSeries& measurements);

/// Runs the filter over the training window [0, gp.training_window].
EstimateSeries stage_filter(const CaseConfig& cfg, const TimeSeries& measurements, std::string* filter_used = nullptr);

CorrectedModel stage_fit(const CaseConfig& cfg, const EstimateSeries& estimates);

/// Residual of the true system relative to the known one along `truth`.
TimeSeries residual_along(const CaseConfig& cfg, const TimeSeries& truth, std::size_t count);

CaseRun run_case(const CaseConfig& cfg);

std::vector<AssertionResult> check_assertions(const CaseConfig& cfg, const CaseRun& run);

std::string report_json(const CaseConfig& cfg, const CaseRun& run);

Provenance provenance_of(const CaseConfig& cfg);

void write_simulation(const std::string& dir, const SimulationOutputs& sim, const Provenance& prov);
void write_case_outputs(const std::string& dir, const CaseConfig& cfg, const CaseRun& run);

/// Long-format overlay (time, channel, series_label, value) of truth,
/// filter estimate and corrected prediction over the filter window.
/// Returns the number of data rows written.
std::size_t write_overlay(const std::string& run_dir, const std::string& out_path);

}  // namespace graybox
