#include "graybox/config.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace graybox {

using json = nlohmann::ordered_json;

namespace {

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

const json& require(const json& j, const std::string& prefix, const std::string& key) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(prefix, key), "missing");
  return *it;
}

double get_number(const json& j, const std::string& prefix, const std::string& key) {
  const json& v = require(j, prefix, key);
  if (!v.is_number()) throw ConfigError(join(prefix, key), "expected a number");
  return v.get<double>();
}

double get_number(const json& j, const std::string& prefix, const std::string& key, double fallback) {
  return j.contains(key) ? get_number(j, prefix, key) : fallback;
}

std::uint64_t get_u64(const json& j, const std::string& prefix, const std::string& key) {
  const json& v = require(j, prefix, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(join(prefix, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& prefix, const std::string& key) {
  const json& v = require(j, prefix, key);
  if (!v.is_string()) throw ConfigError(join(prefix, key), "expected a string");
  return v.get<std::string>();
}

std::string get_string(const json& j, const std::string& prefix, const std::string& key, const std::string& fallback) {
  return j.contains(key) ? get_string(j, prefix, key) : fallback;
}

bool get_bool(const json& j, const std::string& prefix, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(join(prefix, key), "expected true or false");
  return v.get<bool>();
}

Vec get_vec(const json& j, const std::string& prefix, const std::string& key) {
  const json& v = require(j, prefix, key);
  if (!v.is_array()) throw ConfigError(join(prefix, key), "expected an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(join(prefix, key), "expected an array of numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Vec get_vec(const json& j, const std::string& prefix, const std::string& key, const Vec& fallback) {
  return j.contains(key) ? get_vec(j, prefix, key) : fallback;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Models ---------------------------------------------------------------

ModelSpec parse_model(const json& j, const std::string& p) {
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  ModelSpec m;
  m.masses = get_vec(j, p, "masses");
  m.springs = get_vec(j, p, "springs");
  m.dampers = get_vec(j, p, "dampers");
  m.gravity = get_number(j, p, "gravity", 9.81);
  m.noise_intensity = get_vec(j, p, "noise_intensity", Vec::Zero(m.masses.size()));
  const std::string mode = get_string(j, p, "noise_mode", "additive");
  if (mode == "additive")
    m.noise_mode = NoiseMode::Additive;
  else if (mode == "displacement_multiplicative")
    m.noise_mode = NoiseMode::DisplacementMultiplicative;
  else
    throw ConfigError(join(p, "noise_mode"), "expected 'additive' or 'displacement_multiplicative'");

  const std::string np = join(p, "nonlinearity");
  const json nl = j.contains("nonlinearity") ? j.at("nonlinearity") : json{{"type", "none"}};
  const std::string type = get_string(nl, np, "type");
  if (type == "none") {
    m.nonlinearity = NoNonlinearity{};
  } else if (type == "duffing_chain") {
    m.nonlinearity = DuffingChain{get_number(nl, np, "alpha")};
  } else if (type == "duffing_van_der_pol") {
    m.nonlinearity = DuffingVanDerPol{get_number(nl, np, "alpha"), get_bool(nl, np, "negative_linear_stiffness", true)};
  } else if (type == "bouc_wen") {
    BoucWen bw;
    bw.alpha = get_number(nl, np, "alpha", bw.alpha);
    bw.beta = get_number(nl, np, "beta", bw.beta);
    bw.gamma = get_number(nl, np, "gamma", bw.gamma);
    bw.eta = get_number(nl, np, "eta", 1.0);
    bw.k_r = get_number(nl, np, "k_r");
    bw.D_y = get_number(nl, np, "D_y");
    if (nl.contains("Q_y")) {
      bw.Q_y = get_number(nl, np, "Q_y");
    } else {
      m.qy_weight_fraction = get_number(nl, np, "Q_y_weight_fraction");
    }
    const double dof = get_number(nl, np, "attached_dof", 1.0);
    if (dof < 1.0 || dof != std::floor(dof)) throw ConfigError(join(np, "attached_dof"), "expected a 1-based DOF number");
    bw.attached_dof = static_cast<std::size_t>(dof) - 1;
    m.nonlinearity = bw;
  } else {
    throw ConfigError(join(np, "type"), "unknown nonlinearity '" + type + "'");
  }
  return m;
}

json model_json(const ModelSpec& m) {
  json j;
  j["masses"] = vec_json(m.masses);
  j["springs"] = vec_json(m.springs);
  j["dampers"] = vec_json(m.dampers);
  j["gravity"] = m.gravity;
  j["noise_intensity"] = vec_json(m.noise_intensity);
  j["noise_mode"] = m.noise_mode == NoiseMode::Additive ? "additive" : "displacement_multiplicative";
  json nl;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, NoNonlinearity>) {
          nl["type"] = "none";
        } else if constexpr (std::is_same_v<T, DuffingChain>) {
          nl["type"] = "duffing_chain";
          nl["alpha"] = v.alpha;
        } else if constexpr (std::is_same_v<T, DuffingVanDerPol>) {
          nl["type"] = "duffing_van_der_pol";
          nl["alpha"] = v.alpha;
          nl["negative_linear_stiffness"] = v.negative_linear_stiffness;
        } else {
          nl["type"] = "bouc_wen";
          nl["alpha"] = v.alpha;
          nl["beta"] = v.beta;
          nl["gamma"] = v.gamma;
          nl["eta"] = v.eta;
          nl["k_r"] = v.k_r;
          nl["D_y"] = v.D_y;
          if (m.qy_weight_fraction)
            nl["Q_y_weight_fraction"] = *m.qy_weight_fraction;
          else
            nl["Q_y"] = v.Q_y;
          nl["attached_dof"] = v.attached_dof + 1;
        }
      },
      m.nonlinearity);
  j["nonlinearity"] = nl;
  return j;
}

// Forcing --------------------------------------------------------------

BandLimitedWhiteNoise parse_band(const json& j, const std::string& p) {
  BandLimitedWhiteNoise b;
  b.f_lo = get_number(j, p, "f_lo");
  b.f_hi = get_number(j, p, "f_hi");
  b.amplitude_std = get_number(j, p, "amplitude_std");
  b.seed = get_u64(j, p, "seed");
  return b;
}

ForcingConfig parse_forcing(const json& j, const std::string& p) {
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  ForcingConfig f;
  f.duration = get_number(j, p, "duration");
  const std::string type = get_string(j, p, "type");
  if (type == "band_limited") {
    f.spec = parse_band(j, p);
  } else if (type == "hamming_band_limited") {
    f.spec = HammingModulatedNoise{parse_band(j, p)};
  } else if (type == "sinusoid") {
    f.spec = Sinusoid{get_number(j, p, "frequency"), get_number(j, p, "amplitude"), get_number(j, p, "phase", 0.0)};
  } else if (type == "external") {
    f.spec = ExternalRecord{get_string(j, p, "path"), get_number(j, p, "scale", 1.0), get_vec(j, p, "dof_distribution")};
  } else {
    throw ConfigError(join(p, "type"), "unknown forcing type '" + type + "'");
  }
  if (type != "external") f.dof_weights = get_vec(j, p, "dof_weights");
  f.independent_dofs = get_bool(j, p, "independent_dofs", false);
  if (f.independent_dofs && type != "band_limited" && type != "hamming_band_limited")
    throw ConfigError(join(p, "independent_dofs"), "only noise inputs have independent realizations");
  return f;
}

json band_json(json j, const BandLimitedWhiteNoise& b) {
  j["f_lo"] = b.f_lo;
  j["f_hi"] = b.f_hi;
  j["amplitude_std"] = b.amplitude_std;
  j["seed"] = b.seed;
  return j;
}

json forcing_json(const ForcingConfig& f) {
  json j;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BandLimitedWhiteNoise>) {
          j["type"] = "band_limited";
          j = band_json(j, s);
        } else if constexpr (std::is_same_v<T, HammingModulatedNoise>) {
          j["type"] = "hamming_band_limited";
          j = band_json(j, s.inner);
        } else if constexpr (std::is_same_v<T, Sinusoid>) {
          j["type"] = "sinusoid";
          j["frequency"] = s.frequency;
          j["amplitude"] = s.amplitude;
          j["phase"] = s.phase;
        } else {
          j["type"] = "external";
          j["path"] = s.path;
          j["scale"] = s.scale;
          j["dof_distribution"] = vec_json(s.dof_distribution);
        }
      },
      f.spec);
  if (!std::holds_alternative<ExternalRecord>(f.spec)) j["dof_weights"] = vec_json(f.dof_weights);
  j["independent_dofs"] = f.independent_dofs;
  j["duration"] = f.duration;
  return j;
}

// Simulation, filter, GP -----------------------------------------------

std::vector<Measured> parse_measured(const json& j, const std::string& p) {
  const json& v = require(j, p, "measured");
  if (!v.is_array() || v.empty()) throw ConfigError(join(p, "measured"), "expected a non-empty array");
  std::vector<Measured> out;
  for (const auto& e : v) {
    const std::string s = e.is_string() ? e.get<std::string>() : "";
    if (s == "acceleration")
      out.push_back(Measured::Acceleration);
    else if (s == "displacement")
      out.push_back(Measured::Displacement);
    else
      throw ConfigError(join(p, "measured"), "entries must be 'acceleration' or 'displacement'");
  }
  return out;
}

SimConfig parse_sim(const json& j, const std::string& p) {
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  SimConfig s;
  s.dt = get_number(j, p, "dt");
  s.substeps = static_cast<int>(get_number(j, p, "substeps", 1.0));
  s.measured = parse_measured(j, p);
  s.measurement_noise_std = get_vec(j, p, "measurement_noise_std", Vec());
  s.default_noise_fraction = get_number(j, p, "default_noise_fraction", 0.01);
  s.blowup_bound = get_number(j, p, "blowup_bound", 1e6);
  s.initial_displacement = get_vec(j, p, "initial_displacement", Vec());
  s.initial_velocity = get_vec(j, p, "initial_velocity", Vec());
  return s;
}

json sim_json(const SimConfig& s) {
  json j;
  j["dt"] = s.dt;
  j["substeps"] = s.substeps;
  json m = json::array();
  for (const auto q : s.measured) m.push_back(q == Measured::Acceleration ? "acceleration" : "displacement");
  j["measured"] = m;
  j["measurement_noise_std"] = vec_json(s.measurement_noise_std);
  j["default_noise_fraction"] = s.default_noise_fraction;
  j["blowup_bound"] = s.blowup_bound;
  j["initial_displacement"] = vec_json(s.initial_displacement);
  j["initial_velocity"] = vec_json(s.initial_velocity);
  return j;
}

UtParams parse_ut(const json& j, const std::string& p, const std::string& key) {
  UtParams u;
  if (!j.contains(key)) return u;
  const json& v = j.at(key);
  const std::string q = join(p, key);
  u.alpha = get_number(v, q, "alpha", u.alpha);
  u.beta = get_number(v, q, "beta", u.beta);
  u.kappa = get_number(v, q, "kappa", u.kappa);
  return u;
}

json ut_json(const UtParams& u) { return json{{"alpha", u.alpha}, {"beta", u.beta}, {"kappa", u.kappa}}; }

FilterConfig parse_filter(const json& j, const std::string& p) {
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  FilterConfig f;
  const std::string type = get_string(j, p, "type", "auto");
  if (type == "auto")
    f.choice = FilterChoice::Auto;
  else if (type == "dkf")
    f.choice = FilterChoice::DKF;
  else if (type == "dukf")
    f.choice = FilterChoice::DUKF;
  else
    throw ConfigError(join(p, "type"), "expected 'auto', 'dkf' or 'dukf'");
  f.noise.q_force = get_number(j, p, "q_force", 0.1);
  f.noise.q_state = get_vec(j, p, "q_state", Vec());
  f.noise.q_state_default = get_number(j, p, "q_state_default", 1e-8);
  f.noise.r_std = get_vec(j, p, "r_std", Vec());
  f.noise.init_state_mean = get_vec(j, p, "init_state_mean", Vec());
  f.noise.init_state_var = get_number(j, p, "init_state_var", 1.0);
  f.noise.init_force_var = get_number(j, p, "init_force_var", 100.0);
  const std::string integ = get_string(j, p, "integrator", "euler");
  if (integ == "euler")
    f.integrator = StateIntegrator::Euler;
  else if (integ == "rk4")
    f.integrator = StateIntegrator::RK4;
  else
    throw ConfigError(join(p, "integrator"), "expected 'euler' or 'rk4'");
  f.force_ut = parse_ut(j, p, "ut_force");
  f.state_ut = parse_ut(j, p, "ut_state");
  return f;
}

json filter_json(const FilterConfig& f) {
  json j;
  j["type"] = f.choice == FilterChoice::Auto ? "auto" : f.choice == FilterChoice::DKF ? "dkf" : "dukf";
  j["q_force"] = f.noise.q_force;
  j["q_state"] = vec_json(f.noise.q_state);
  j["q_state_default"] = f.noise.q_state_default;
  j["r_std"] = vec_json(f.noise.r_std);
  j["init_state_mean"] = vec_json(f.noise.init_state_mean);
  j["init_state_var"] = f.noise.init_state_var;
  j["init_force_var"] = f.noise.init_force_var;
  j["integrator"] = f.integrator == StateIntegrator::Euler ? "euler" : "rk4";
  j["ut_force"] = ut_json(f.force_ut);
  j["ut_state"] = ut_json(f.state_ut);
  return j;
}

GpConfig parse_gp(const json& j, const std::string& p) {
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  GpConfig g;
  try {
    g.kernel = kernel_family_from_string(get_string(j, p, "kernel", "SquaredExponential"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join(p, "kernel"), e.what());
  }
  try {
    g.mean = mean_family_from_string(get_string(j, p, "mean", "Zero"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join(p, "mean"), e.what());
  }
  g.stride = static_cast<std::size_t>(get_number(j, p, "stride", 1.0));
  g.max_points = static_cast<std::size_t>(get_number(j, p, "max_points", 2000.0));
  g.training_window = get_number(j, p, "training_window");
  g.fit.restarts = static_cast<int>(get_number(j, p, "restarts", 8.0));
  g.fit.max_iterations = static_cast<int>(get_number(j, p, "max_iterations", 200.0));
  g.fit.parallel = get_bool(j, p, "parallel", true);
  g.fit.min_noise_var = get_number(j, p, "min_noise_var", 1e-10);
  if (j.contains("features")) {
    const json& f = j.at("features");
    const std::string fp = join(p, "features");
    const std::string mode = get_string(f, fp, "mode");
    if (mode == "all") {
      g.features.mode = FeatureSpec::Mode::All;
    } else if (mode == "chain_neighborhood") {
      g.features.mode = FeatureSpec::Mode::ChainNeighborhood;
      g.features.radius = static_cast<std::size_t>(get_number(f, fp, "radius", 1.0));
    } else if (mode == "explicit") {
      g.features.mode = FeatureSpec::Mode::Explicit;
      const json& d = require(f, fp, "dofs");
      if (!d.is_array()) throw ConfigError(join(fp, "dofs"), "expected an array of 1-based DOF lists");
      for (const auto& list : d) {
        std::vector<std::size_t> dofs;
        if (!list.is_array()) throw ConfigError(join(fp, "dofs"), "expected an array of 1-based DOF lists");
        for (const auto& e : list) {
          if (!e.is_number_integer() || e.get<long long>() < 1) throw ConfigError(join(fp, "dofs"), "DOF numbers are 1-based integers");
          dofs.push_back(static_cast<std::size_t>(e.get<long long>() - 1));
        }
        g.features.dofs.push_back(std::move(dofs));
      }
    } else {
      throw ConfigError(join(fp, "mode"), "expected 'all', 'chain_neighborhood' or 'explicit'");
    }
  }
  return g;
}

json gp_json(const GpConfig& g) {
  json j;
  j["kernel"] = to_string(g.kernel);
  j["mean"] = to_string(g.mean);
  json f;
  switch (g.features.mode) {
    case FeatureSpec::Mode::All:
      f["mode"] = "all";
      break;
    case FeatureSpec::Mode::ChainNeighborhood:
      f["mode"] = "chain_neighborhood";
      f["radius"] = g.features.radius;
      break;
    case FeatureSpec::Mode::Explicit: {
      f["mode"] = "explicit";
      json d = json::array();
      for (const auto& list : g.features.dofs) {
        json l = json::array();
        for (const auto v : list) l.push_back(v + 1);
        d.push_back(l);
      }
      f["dofs"] = d;
      break;
    }
  }
  j["features"] = f;
  j["stride"] = g.stride;
  j["max_points"] = g.max_points;
  j["training_window"] = g.training_window;
  j["restarts"] = g.fit.restarts;
  j["max_iterations"] = g.fit.max_iterations;
  j["parallel"] = g.fit.parallel;
  j["min_noise_var"] = g.fit.min_noise_var;
  return j;
}

Assertions parse_assertions(const json& j, const std::string& p) {
  Assertions a;
  if (!j.is_object()) throw ConfigError(p, "expected an object");
  if (j.contains("train_nrmse_max")) a.train_nrmse_max = get_number(j, p, "train_nrmse_max");
  if (j.contains("test_ratio_max")) a.test_ratio_max = get_number(j, p, "test_ratio_max");
  if (j.contains("filter_correlation_min")) a.filter_correlation_min = get_number(j, p, "filter_correlation_min");
  if (j.contains("filter_nrmse_max")) a.filter_nrmse_max = get_number(j, p, "filter_nrmse_max");
  a.train_improves = get_bool(j, p, "train_improves", true);
  if (j.contains("channels")) {
    const json& c = j.at("channels");
    if (!c.is_array()) throw ConfigError(join(p, "channels"), "expected an array of channel prefixes");
    a.channels.clear();
    for (const auto& e : c) {
      if (!e.is_string()) throw ConfigError(join(p, "channels"), "expected an array of channel prefixes");
      a.channels.push_back(e.get<std::string>());
    }
  }
  return a;
}

json assertions_json(const Assertions& a) {
  json j;
  if (a.train_nrmse_max) j["train_nrmse_max"] = *a.train_nrmse_max;
  if (a.test_ratio_max) j["test_ratio_max"] = *a.test_ratio_max;
  if (a.filter_correlation_min) j["filter_correlation_min"] = *a.filter_correlation_min;
  if (a.filter_nrmse_max) j["filter_nrmse_max"] = *a.filter_nrmse_max;
  j["train_improves"] = a.train_improves;
  j["channels"] = a.channels;
  return j;
}

}  // namespace

SystemModel ModelSpec::build() const {
  NonlinearityKind nl = nonlinearity;
  if (auto* bw = std::get_if<BoucWen>(&nl); bw && qy_weight_fraction) bw->Q_y = *qy_weight_fraction * masses.sum() * gravity;
  return make_chain_model(masses, springs, dampers, nl, noise_intensity, noise_mode);
}

void CaseConfig::validate() const {
  auto check_model = [](const ModelSpec& m, const std::string& field) {
    if (m.masses.size() == 0) throw ConfigError(field + ".masses", "must not be empty");
    try {
      m.build();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field, e.what());
    }
  };
  check_model(true_model, "true_model");
  check_model(known_model, "known_model");
  const auto n = true_model.masses.size();
  if (known_model.masses.size() != n) throw ConfigError("known_model.masses", "DOF count differs from true_model");
  if (!known_model.masses.isApprox(true_model.masses)) throw ConfigError("known_model.masses", "must equal the true masses");
  if (std::holds_alternative<BoucWen>(known_model.nonlinearity))
    throw ConfigError("known_model.nonlinearity", "hysteretic known models are not supported");
  if (!(sim.dt > 0.0)) throw ConfigError("sim.dt", "must be positive");
  if (sim.substeps < 1) throw ConfigError("sim.substeps", "must be >= 1");
  for (const auto* f : {&forcing_train, &forcing_test}) {
    const std::string field = f == &forcing_train ? "forcing_train" : "forcing_test";
    if (!(f->duration >= sim.dt)) throw ConfigError(field + ".duration", "must be at least one sample");
    if (!std::holds_alternative<ExternalRecord>(f->spec) && f->dof_weights.size() != n)
      throw ConfigError(field + ".dof_weights", "must have one entry per DOF");
    if (const auto* e = std::get_if<ExternalRecord>(&f->spec); e && e->dof_distribution.size() != n)
      throw ConfigError(field + ".dof_distribution", "must have one entry per DOF");
    const BandLimitedWhiteNoise* band = std::get_if<BandLimitedWhiteNoise>(&f->spec);
    if (const auto* h = std::get_if<HammingModulatedNoise>(&f->spec)) band = &h->inner;
    if (band && !(band->f_lo > 0.0 && band->f_lo < band->f_hi && band->f_hi < 0.5 / sim.dt))
      throw ConfigError(field, "band must satisfy 0 < f_lo < f_hi < Nyquist");
  }
  if (!(gp.training_window > 0.0)) throw ConfigError("gp.training_window", "must be positive");
  if (gp.training_window > forcing_train.duration) throw ConfigError("gp.training_window", "exceeds forcing_train.duration");
  if (gp.fit.restarts < 1) throw ConfigError("gp.restarts", "must be >= 1");
  if (sim.initial_displacement.size() != 0 && sim.initial_displacement.size() != n)
    throw ConfigError("sim.initial_displacement", "must have one entry per DOF");
  if (sim.initial_velocity.size() != 0 && sim.initial_velocity.size() != n)
    throw ConfigError("sim.initial_velocity", "must have one entry per DOF");
  if (filter.noise.init_state_mean.size() != 0 && filter.noise.init_state_mean.size() != 2 * n)
    throw ConfigError("filter.init_state_mean", "must have 2 entries per DOF");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

SimConfig CaseConfig::train_sim() const {
  SimConfig s = sim;
  s.duration = forcing_train.duration;
  s.seed = seed;
  return s;
}

SimConfig CaseConfig::test_sim() const {
  SimConfig s = sim;
  s.duration = forcing_test.duration;
  s.seed = seed + 3;
  return s;
}

GpConfig CaseConfig::gp_config() const {
  GpConfig g = gp;
  g.fit.seed = seed + 2;
  return g;
}

std::string CaseConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

CaseConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  CaseConfig c;
  c.base_dir = base_dir;
  c.name = get_string(j, "", "name", "case");
  c.seed = get_u64(j, "", "seed");
  c.true_model = parse_model(require(j, "", "true_model"), "true_model");
  c.known_model = parse_model(require(j, "", "known_model"), "known_model");
  c.forcing_train = parse_forcing(require(j, "", "forcing_train"), "forcing_train");
  c.forcing_test = parse_forcing(require(j, "", "forcing_test"), "forcing_test");
  c.sim = parse_sim(require(j, "", "sim"), "sim");
  c.filter = parse_filter(j.contains("filter") ? j.at("filter") : json::object(), "filter");
  c.gp = parse_gp(require(j, "", "gp"), "gp");
  if (j.contains("assertions")) c.assertions = parse_assertions(j.at("assertions"), "assertions");
  c.output_dir = get_string(j, "", "output_dir", "out");
  c.validate();
  return c;
}

CaseConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(buf.str(), dir.empty() ? "." : dir.string());
}

std::string serialize_config(const CaseConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["true_model"] = model_json(c.true_model);
  j["known_model"] = model_json(c.known_model);
  j["forcing_train"] = forcing_json(c.forcing_train);
  j["forcing_test"] = forcing_json(c.forcing_test);
  j["sim"] = sim_json(c.sim);
  j["filter"] = filter_json(c.filter);
  j["gp"] = gp_json(c.gp);
  j["assertions"] = assertions_json(c.assertions);
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

std::string config_digest(const CaseConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

TimeSeries realize_case_forcing(const CaseConfig& cfg, const ForcingConfig& forcing) {
  ForcingSpec spec = forcing.spec;
  if (auto* e = std::get_if<ExternalRecord>(&spec)) e->path = cfg.resolve(e->path);
  if (forcing.independent_dofs) return realize_forcing_independent(spec, cfg.sim.dt, forcing.duration, forcing.dof_weights);
  return realize_forcing(spec, cfg.sim.dt, forcing.duration, forcing.dof_weights);
}

}  // namespace graybox
