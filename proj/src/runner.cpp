#include "graybox/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace graybox {

using json = nlohmann::ordered_json;

namespace {

std::vector<MetricWindow> train_windows(const CaseConfig& cfg) {
  const double total = static_cast<double>(sample_count(cfg.forcing_train.duration, cfg.sim.dt) - 1) * cfg.sim.dt;
  std::vector<MetricWindow> w{{"full", 0.0, total, true}, {"train", 0.0, cfg.gp.training_window, true}};
  if (total > cfg.gp.training_window + 0.5 * cfg.sim.dt) w.push_back({"extrapolation", cfg.gp.training_window, total, false});
  return w;
}

std::vector<MetricWindow> test_windows(const CaseConfig& cfg) {
  const double total = static_cast<double>(sample_count(cfg.forcing_test.duration, cfg.sim.dt) - 1) * cfg.sim.dt;
  return {{"full", 0.0, total, true}};
}

bool has_prefix(const std::string& label, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (label.rfind(p + "_", 0) == 0) return true;
  return false;
}

json metrics_json(const RunReport& r) {
  json a = json::array();
  for (const auto& m : r.metrics)
    a.push_back({{"channel", m.channel}, {"window", m.window}, {"rmse", m.rmse}, {"nrmse", m.nrmse},
                 {"correlation", m.correlation}});
  return a;
}

json windows_json(const RunReport& r) {
  json a = json::array();
  for (const auto& w : r.windows)
    a.push_back({{"name", w.name}, {"t_begin", w.t_begin}, {"t_end", w.t_end}, {"include_begin", w.include_begin}});
  return a;
}

TimeSeries without_metadata(TimeSeries ts) {
  ts.metadata.clear();
  return ts;
}

}  // namespace

Provenance provenance_of(const CaseConfig& cfg) { return Provenance{config_digest(cfg), cfg.seed}; }

SimulationOutputs stage_simulate(const CaseConfig& cfg) {
  SimulationOutputs out;
  const SystemModel truth = cfg.true_model.build();
  out.forcing_train = realize_case_forcing(cfg, cfg.forcing_train);
  out.forcing_test = realize_case_forcing(cfg, cfg.forcing_test);
  const SimConfig train = cfg.train_sim();
  const SimConfig test = cfg.test_sim();
  try {
    out.truth_train = simulate_taylor15(truth, out.forcing_train, train);
    out.truth_test = simulate_taylor15(truth, out.forcing_test, test);
  } catch (const DivergenceError& e) {
    throw std::runtime_error(std::string("simulate stage: ") + e.what());
  }
  out.measurements = synthesize_measurements(out.truth_train, truth, out.forcing_train, train);
  return out;
}

FilterConfig resolved_filter_config(const CaseConfig& cfg, const TimeSeries& measurements) {
  FilterConfig f = cfg.filter;
  f.noise.measured = cfg.sim.measured;
  if (f.noise.init_state_mean.size() == 0) {
    // Default to the configured initial condition.
    const auto n = cfg.true_model.masses.size();
    Vec mean = Vec::Zero(2 * n);
    if (cfg.sim.initial_displacement.size() == n) mean.head(n) = cfg.sim.initial_displacement;
    if (cfg.sim.initial_velocity.size() == n) mean.tail(n) = cfg.sim.initial_velocity;
    f.noise.init_state_mean = mean;
  }
  if (f.noise.r_std.size() == 0) {
    const auto labels = measured_labels(cfg.true_model.masses.size(), cfg.sim.measured);
    Vec r(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto it = measurements.metadata.find("noise_std." + labels[i]);
      if (it == measurements.metadata.end())
        throw std::runtime_error("filter stage: measurement record lacks the noise level of '" + labels[i] +
                                 "'; set filter.r_std");
      r(static_cast<Eigen::Index>(i)) = std::stod(it->second);
    }
    f.noise.r_std = r;
  }
  return f;
}

EstimateSeries stage_filter(const CaseConfig& cfg, const TimeSeries& measurements, std::string* filter_used) {
  const SystemModel known = cfg.known_model.build();
  const FilterConfig fc = resolved_filter_config(cfg, measurements);
  const std::size_t count = window_samples(cfg.gp.training_window, measurements.dt());
  if (count > measurements.length()) throw std::runtime_error("filter stage: training window exceeds the measurement record");
  const TimeSeries window = measurements.slice(0, count);
  const TimeSeries input = window.select_prefix("force");
  if (filter_used) *filter_used = selected_filter(known, fc);
  try {
    return estimate_residual(known, window, input, fc);
  } catch (const FilterError& e) {
    throw std::runtime_error(std::string("filter stage: ") + e.what());
  }
}

CorrectedModel stage_fit(const CaseConfig& cfg, const EstimateSeries& estimates) {
  return build_corrected_model(cfg.known_model.build(), estimates, cfg.gp_config());
}

TimeSeries residual_along(const CaseConfig& cfg, const TimeSeries& truth, std::size_t count) {
  const SystemModel tm = cfg.true_model.build();
  const SystemModel km = cfg.known_model.build();
  const std::size_t n = tm.n_dof();
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(channel_label("res", i));
  Mat values(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n));
  const Mat& y = truth.values();
  for (std::size_t k = 0; k < count; ++k) {
    const Vec row = y.row(static_cast<Eigen::Index>(k)).head(static_cast<Eigen::Index>(tm.state_dim())).transpose();
    const auto state = AugmentedState::from_flat(tm, row);
    values.row(static_cast<Eigen::Index>(k)) = true_residual(tm, km, state).transpose();
  }
  return TimeSeries(truth.dt(), std::move(labels), std::move(values));
}

CaseRun run_case(const CaseConfig& cfg) {
  cfg.validate();
  CaseRun run;
  run.sim = stage_simulate(cfg);
  run.estimates = stage_filter(cfg, run.sim.measurements, &run.filter_used);
  const std::size_t count = run.estimates.length();
  run.true_residual = residual_along(cfg, run.sim.truth_train, count);

  // Filter quality against the ground truth over the filter window.
  const TimeSeries est = run.estimates.means();
  const TimeSeries truth_window = run.sim.truth_train.slice(0, count).joined(run.true_residual);
  const double t_end = static_cast<double>(count - 1) * cfg.sim.dt;
  run.filter_report = evaluate(est, truth_window, {{"train", 0.0, t_end, true}});

  try {
    run.corrected = stage_fit(cfg, run.estimates);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("fit-gp stage: ") + e.what());
  }
  CorrectedModel known_only;
  known_only.known = run.corrected.known;
  known_only.feature_spec = run.corrected.feature_spec;

  const SimConfig train = cfg.train_sim();
  const SimConfig test = cfg.test_sim();
  try {
    run.predicted_train = predict_response(run.corrected, run.sim.forcing_train, train);
    run.predicted_test = predict_response(run.corrected, run.sim.forcing_test, test);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("predict stage: ") + e.what());
  }
  try {
    run.known_train = predict_response(known_only, run.sim.forcing_train, train);
    run.known_test = predict_response(known_only, run.sim.forcing_test, test);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("known-model stage: ") + e.what());
  }
  run.corrected_train_report = evaluate(run.predicted_train, run.sim.truth_train, train_windows(cfg));
  run.known_train_report = evaluate(run.known_train, run.sim.truth_train, train_windows(cfg));
  run.corrected_test_report = evaluate(run.predicted_test, run.sim.truth_test, test_windows(cfg));
  run.known_test_report = evaluate(run.known_test, run.sim.truth_test, test_windows(cfg));
  return run;
}

std::vector<AssertionResult> check_assertions(const CaseConfig& cfg, const CaseRun& run) {
  std::vector<AssertionResult> out;
  const auto& a = cfg.assertions;
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
  };
  for (const auto& m : run.corrected_train_report.metrics) {
    if (m.window != "full" || !has_prefix(m.channel, a.channels)) continue;
    const auto& k = run.known_train_report.find(m.channel, "full");
    if (a.train_nrmse_max)
      out.push_back({"train_nrmse " + m.channel, m.nrmse <= *a.train_nrmse_max,
                     "corrected nrmse " + fmt(m.nrmse) + " <= " + fmt(*a.train_nrmse_max)});
    if (a.train_improves)
      out.push_back({"train_improves " + m.channel, m.nrmse < k.nrmse,
                     "corrected nrmse " + fmt(m.nrmse) + " < known nrmse " + fmt(k.nrmse)});
  }
  if (a.test_ratio_max) {
    for (const auto& m : run.corrected_test_report.metrics) {
      if (!has_prefix(m.channel, a.channels)) continue;
      const auto& k = run.known_test_report.find(m.channel, m.window);
      const double ratio = m.nrmse / k.nrmse;
      out.push_back({"test_ratio " + m.channel, ratio <= *a.test_ratio_max,
                     "corrected/known nrmse " + fmt(m.nrmse) + "/" + fmt(k.nrmse) + " = " + fmt(ratio) +
                         " <= " + fmt(*a.test_ratio_max)});
    }
  }
  for (const auto& m : run.filter_report.metrics) {
    if (m.channel.rfind("res_", 0) != 0) continue;
    if (a.filter_correlation_min)
      out.push_back({"filter_correlation " + m.channel, m.correlation >= *a.filter_correlation_min,
                     "correlation " + fmt(m.correlation) + " >= " + fmt(*a.filter_correlation_min)});
    if (a.filter_nrmse_max)
      out.push_back({"filter_nrmse " + m.channel, m.nrmse <= *a.filter_nrmse_max,
                     "nrmse " + fmt(m.nrmse) + " <= " + fmt(*a.filter_nrmse_max)});
  }
  return out;
}

std::string report_json(const CaseConfig& cfg, const CaseRun& run) {
  json j;
  j["case"] = cfg.name;
  j["config_digest"] = config_digest(cfg);
  j["seed"] = cfg.seed;
  j["filter"] = run.filter_used;
  j["filter_samples"] = run.estimates.length();
  j["gp"] = json::array();
  for (std::size_t c = 0; c < run.corrected.residual_gps.size(); ++c) {
    const auto& g = run.corrected.residual_gps[c];
    json ls = json::array();
    for (Eigen::Index d = 0; d < g.kernel().lengthscales.size(); ++d) ls.push_back(g.kernel().lengthscales(d));
    j["gp"].push_back({{"channel", channel_label("res", c)},
                       {"kernel", to_string(g.kernel().family)},
                       {"signal_var", g.kernel().signal_var},
                       {"lengthscales", ls},
                       {"noise_var", g.noise_var()},
                       {"training_points", g.train_x().rows()},
                       {"log_likelihood", g.log_likelihood()}});
  }
  j["filter_metrics"] = {{"windows", windows_json(run.filter_report)}, {"metrics", metrics_json(run.filter_report)}};
  j["train_input"] = {{"windows", windows_json(run.corrected_train_report)},
                      {"corrected", metrics_json(run.corrected_train_report)},
                      {"known", metrics_json(run.known_train_report)}};
  j["test_input"] = {{"windows", windows_json(run.corrected_test_report)},
                     {"corrected", metrics_json(run.corrected_test_report)},
                     {"known", metrics_json(run.known_test_report)}};
  json checks = json::array();
  bool all = true;
  for (const auto& r : check_assertions(cfg, run)) {
    checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    all = all && r.passed;
  }
  j["assertions"] = checks;
  j["all_passed"] = all;
  return j.dump(2) + "\n";
}

void write_simulation(const std::string& dir, const SimulationOutputs& sim, const Provenance& prov) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  write_csv((d / "forcing_train.csv").string(), sim.forcing_train, prov);
  write_csv((d / "forcing_test.csv").string(), sim.forcing_test, prov);
  write_csv((d / "truth_train.csv").string(), sim.truth_train, prov);
  write_csv((d / "truth_test.csv").string(), sim.truth_test, prov);
  write_csv((d / "measurements.csv").string(), sim.measurements, prov);
}

void write_case_outputs(const std::string& dir, const CaseConfig& cfg, const CaseRun& run) {
  const Provenance prov = provenance_of(cfg);
  write_simulation(dir, run.sim, prov);
  const std::filesystem::path d(dir);
  TimeSeries means = run.estimates.means();
  means.metadata["filter"] = run.filter_used;
  write_csv((d / "estimates.csv").string(), means, prov);
  write_csv((d / "estimates_var.csv").string(), run.estimates.variances(), prov);
  write_csv((d / "true_residual.csv").string(), run.true_residual, prov);
  save_models((d / "gp_models.txt").string(), run.corrected.residual_gps,
              "config_digest=" + prov.config_digest + " seed=" + std::to_string(prov.seed));
  write_csv((d / "predicted_train.csv").string(), without_metadata(run.predicted_train), prov);
  write_csv((d / "predicted_test.csv").string(), without_metadata(run.predicted_test), prov);
  write_csv((d / "known_train.csv").string(), without_metadata(run.known_train), prov);
  write_csv((d / "known_test.csv").string(), without_metadata(run.known_test), prov);
  std::ofstream report(d / "report.json", std::ios::binary);
  report << report_json(cfg, run);
  std::ofstream config(d / "config.json", std::ios::binary);
  config << serialize_config(cfg);
}

std::size_t write_overlay(const std::string& run_dir, const std::string& out_path) {
  const std::filesystem::path d(run_dir);
  for (const char* f : {"truth_train.csv", "estimates.csv", "predicted_train.csv"})
    if (!std::filesystem::exists(d / f))
      throw std::runtime_error("plotdata: '" + run_dir + "' lacks " + f + " (run run-case first)");
  const TimeSeries truth = read_csv((d / "truth_train.csv").string());
  const TimeSeries filtered = read_csv((d / "estimates.csv").string());
  const TimeSeries corrected = read_csv((d / "predicted_train.csv").string());
  const std::size_t count = filtered.length();
  if (truth.length() < count || corrected.length() < count)
    throw std::runtime_error("plotdata: truth or prediction shorter than the estimates");

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("plotdata: cannot open '" + out_path + "'");
  const auto digest = filtered.metadata.count("config_digest") ? filtered.metadata.at("config_digest") : "none";
  const auto seed = filtered.metadata.count("seed") ? filtered.metadata.at("seed") : "0";
  out << "# config_digest=" << digest << " seed=" << seed << '\n';
  out << "time,channel,series_label,value\n";
  std::size_t rows = 0;
  for (const auto& label : filtered.labels()) {
    if (!truth.has_channel(label) || !corrected.has_channel(label)) continue;
    const Vec t = truth.channel(label);
    const Vec f = filtered.channel(label);
    const Vec c = corrected.channel(label);
    for (const auto& [name, series] : {std::pair<const char*, const Vec*>{"truth", &t}, {"filtered", &f}, {"corrected", &c}}) {
      for (std::size_t k = 0; k < count; ++k) {
        out << format_double(filtered.time(k)) << ',' << label << ',' << name << ','
            << format_double((*series)(static_cast<Eigen::Index>(k))) << '\n';
        ++rows;
      }
    }
  }
  if (rows == 0) throw std::runtime_error("plotdata: no channels shared by truth, estimates and prediction");
  return rows;
}

}  // namespace graybox
