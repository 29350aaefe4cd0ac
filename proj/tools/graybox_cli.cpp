// Command-line front end for the gray-box pipeline.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "graybox/config.hpp"
#include "graybox/csv.hpp"
#include "graybox/gpr.hpp"
#include "graybox/runner.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

graybox::CaseConfig load(const Common& c) {
  graybox::CaseConfig cfg = graybox::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

// --out beats GRAYBOX_OUTPUT_DIR beats the config's output_dir.
std::string output_dir(const Common& c, const graybox::CaseConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("GRAYBOX_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

std::string in_dir(const std::string& dir, const char* file) { return (std::filesystem::path(dir) / file).string(); }

void add_common(CLI::App* app, Common& c, bool with_seed) {
  app->add_option("--config", c.config_path, "Case configuration (JSON)")->required()->check(CLI::ExistingFile);
  if (with_seed) app->add_option("--seed", c.seed, "Override the global seed");
  app->add_option("--out", c.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gray-box model-form error correction: filter, learn the residual, predict."};
  app.require_subcommand(1);

  Common sim_opts, filter_opts, fit_opts, run_opts;
  bool assert_thresholds = false;
  std::string plot_dir;

  auto* simulate = app.add_subcommand("simulate", "Simulate ground truth, forcing and measurements");
  add_common(simulate, sim_opts, true);
  auto* filter = app.add_subcommand("filter", "Estimate states and residual forces from measurements.csv");
  add_common(filter, filter_opts, true);
  auto* fit_gp = app.add_subcommand("fit-gp", "Fit residual GPs from estimates.csv");
  add_common(fit_gp, fit_opts, true);
  auto* run_case = app.add_subcommand("run-case", "Run the full pipeline and write a report");
  add_common(run_case, run_opts, true);
  run_case->add_flag("--assert", assert_thresholds, "Exit with status 2 if a configured threshold is violated");
  auto* plotdata = app.add_subcommand("plotdata", "Write overlay.csv for a completed run directory");
  plotdata->add_option("--out,run_dir", plot_dir, "Run directory; overlay.csv is written into it")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto cfg = load(sim_opts);
      const auto dir = output_dir(sim_opts, cfg);
      graybox::write_simulation(dir, graybox::stage_simulate(cfg), graybox::provenance_of(cfg));
      std::cout << "simulate: wrote " << dir << "\n";
    } else if (*filter) {
      const auto cfg = load(filter_opts);
      const auto dir = output_dir(filter_opts, cfg);
      const auto meas = graybox::read_csv(in_dir(dir, "measurements.csv"));
      std::string used;
      const auto est = graybox::stage_filter(cfg, meas, &used);
      const auto prov = graybox::provenance_of(cfg);
      auto means = est.means();
      means.metadata["filter"] = used;
      graybox::write_csv(in_dir(dir, "estimates.csv"), means, prov);
      graybox::write_csv(in_dir(dir, "estimates_var.csv"), est.variances(), prov);
      std::cout << "filter: " << used << ", " << est.length() << " samples\n";
    } else if (*fit_gp) {
      const auto cfg = load(fit_opts);
      const auto dir = output_dir(fit_opts, cfg);
      const auto est = graybox::EstimateSeries::from_tables(graybox::read_csv(in_dir(dir, "estimates.csv")),
                                                            graybox::read_csv(in_dir(dir, "estimates_var.csv")));
      const auto corrected = graybox::stage_fit(cfg, est);
      const auto prov = graybox::provenance_of(cfg);
      graybox::save_models(in_dir(dir, "gp_models.txt"), corrected.residual_gps,
                           "config_digest=" + prov.config_digest + " seed=" + std::to_string(prov.seed));
      std::cout << "fit-gp: " << corrected.residual_gps.size() << " models\n";
    } else if (*run_case) {
      const auto cfg = load(run_opts);
      const auto dir = output_dir(run_opts, cfg);
      const auto run = graybox::run_case(cfg);
      graybox::write_case_outputs(dir, cfg, run);
      bool ok = true;
      for (const auto& r : graybox::check_assertions(cfg, run)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        ok = ok && r.passed;
      }
      std::cout << "run-case: " << cfg.name << " (" << run.filter_used << ") -> " << dir << "\n";
      if (assert_thresholds && !ok) return 2;
    } else if (*plotdata) {
      const auto rows = graybox::write_overlay(plot_dir, in_dir(plot_dir, "overlay.csv"));
      std::cout << "plotdata: " << rows << " rows\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
