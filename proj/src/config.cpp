#include "sgdkf/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sgdkf/error.hpp"

namespace sgdkf {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::ConfigInvalid, "field '" + field + "' " + what);
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Field access with dotted-path diagnostics.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  Node child(const char* key) const {
    if (!has(key)) fail(join(path_, key), "is required but missing");
    const json& c = j_.at(key);
    if (!c.is_object()) fail(join(path_, key), "must be an object");
    return Node(c, join(path_, key));
  }

  double number(const char* key) const {
    if (!has(key)) fail(join(path_, key), "is required but missing");
    const json& v = j_.at(key);
    if (!v.is_number()) fail(join(path_, key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(join(path_, key), "must be finite");
    return d;
  }

  double number_or(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::uint64_t unsigned_integer(const char* key) const {
    if (!has(key)) fail(join(path_, key), "is required but missing");
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(join(path_, key), "must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean_or(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) fail(join(path_, key), "must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const char* key) const {
    if (!has(key)) fail(join(path_, key), "is required but missing");
    if (!j_.at(key).is_string()) fail(join(path_, key), "must be a string");
    return j_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const char* key) const {
    if (!has(key)) fail(join(path_, key), "is required but missing");
    const json& v = j_.at(key);
    if (!v.is_array()) fail(join(path_, key), "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(join(path_, key) + "[" + std::to_string(i) + "]", "must be a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  Vector5 vector5(const char* key) const {
    const auto v = numbers(key);
    if (v.size() != 5) fail(join(path_, key), "must hold exactly 5 numbers");
    return Vector5(v[0], v[1], v[2], v[3], v[4]);
  }

  std::vector<std::string> strings(const char* key) const {
    if (!has(key)) fail(join(path_, key), "is required but missing");
    const json& v = j_.at(key);
    if (!v.is_array()) fail(join(path_, key), "must be an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(join(path_, key) + "[" + std::to_string(i) + "]", "must be a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

OcvCurve read_ocv(const Node& n) {
  try {
    return OcvCurve(n.numbers("breakpoints"), n.numbers("voltages"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    fail(n.path(), e.what());
  }
}

CellParameters read_cell(const Node& n) {
  CellParameters c;
  c.q_all = n.number("q_all");
  c.c_ref = n.number("c_ref");
  c.peukert_n = n.number("peukert_n");
  c.d_p = n.number("d_p");
  c.d_n = n.number("d_n");
  c.tau_sp = n.number("tau_sp");
  c.tau_sn = n.number("tau_sn");
  c.g_p = n.number("g_p");
  c.g_n = n.number("g_n");
  c.tau_e = n.number("tau_e");
  c.p_con_a = n.number("p_con_a");
  c.p_con_b = n.number("p_con_b");
  c.t_plus = n.number("t_plus");
  c.c0 = n.number("c0");
  c.temperature_k = n.number("temperature_k");
  c.v_p = n.number("v_p");
  c.v_n = n.number("v_n");
  c.p_rxn_p = n.number("p_rxn_p");
  c.p_rxn_n = n.number("p_rxn_n");
  c.r_ohm = n.number("r_ohm");
  c.x_sp0 = n.number("x_sp0");
  c.x_sn0 = n.number("x_sn0");
  c.dt = n.number("dt");
  c.ocv_p = read_ocv(n.child("ocv_p"));
  c.ocv_n = read_ocv(n.child("ocv_n"));
  try {
    validate(c);
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  return c;
}

ScenarioSpec read_scenario(const Node& n, double dt, const std::string& base_dir) {
  ScenarioSpec s;
  s.name = n.string("name");
  if (s.name.empty() || s.name.find_first_of(",/\\\n") != std::string::npos) {
    fail(join(n.path(), "name"), "must be non-empty without ',', '/' or newlines");
  }
  const Node p = n.child("profile");
  try {
    s.profile.kind = parse_profile_kind(p.string("kind"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    fail(join(p.path(), "kind"), "must be constant, pulse_dynamic or from_file");
  }
  s.profile.dt = dt;
  switch (s.profile.kind) {
    case ProfileKind::Constant:
      s.profile.duration_s = p.number("duration_s");
      s.profile.amplitude_a = p.number("amplitude_a");
      break;
    case ProfileKind::PulseDynamic:
      s.profile.duration_s = p.number("duration_s");
      s.profile.seed = p.unsigned_integer("seed");
      s.profile.one_c_a = p.number("one_c_a");
      break;
    case ProfileKind::FromFile: {
      s.profile_file = p.string("file");
      const std::filesystem::path file =
          std::filesystem::path(s.profile_file).is_absolute() ? std::filesystem::path(s.profile_file)
                                                              : std::filesystem::path(base_dir) / s.profile_file;
      if (!std::filesystem::exists(file)) fail(join(p.path(), "file"), "names a missing file: " + file.string());
      try {
        s.profile.samples = read_profile_csv(file.string());
      } catch (const Error& e) {
        fail(join(p.path(), "file"), e.what());
      }
      s.profile.duration_s = static_cast<double>(s.profile.samples.size()) * dt;
      break;
    }
  }
  try {
    (void)generate_profile(s.profile);
  } catch (const Error& e) {
    fail(p.path(), e.what());
  }

  s.initial_soc = n.number_or("initial_soc", 1.0);
  if (!(s.initial_soc >= 0.05 && s.initial_soc <= 1.0)) fail(join(n.path(), "initial_soc"), "must lie in [0.05, 1]");
  s.init_soc_errors_pct = n.numbers("init_soc_error_pct");
  if (s.init_soc_errors_pct.empty()) fail(join(n.path(), "init_soc_error_pct"), "must not be empty");
  for (double e : s.init_soc_errors_pct) {
    if (!(e >= 0.0 && e <= 100.0)) fail(join(n.path(), "init_soc_error_pct"), "entries must lie in [0, 100]");
  }
  for (const auto& name : n.strings("algorithms")) {
    try {
      s.algorithms.push_back(parse_algorithm(name));
    } catch (const Error&) {
      fail(join(n.path(), "algorithms"), "contains unknown algorithm '" + name + "'");
    }
  }
  if (s.algorithms.empty()) fail(join(n.path(), "algorithms"), "must not be empty");
  return s;
}

json vec_json(const Vector5& v) { return json::array({v(0), v(1), v(2), v(3), v(4)}); }

json ocv_json(const OcvCurve& c) { return {{"breakpoints", c.breakpoints()}, {"voltages", c.voltages()}}; }

}  // namespace

NoiseConfig NoiseSpec::to_noise_config() const {
  NoiseConfig n;
  n.q_state = q_state_diag.asDiagonal();
  n.r_meas = r_meas;
  n.q_theta = q_theta_diag.asDiagonal();
  return n;
}

NoiseSpec default_noise(const CellParameters& cell) {
  NoiseSpec n;
  n.q_state_diag << 1e-10, 1e-12, 1e-12, 1e-4, 1e-4;
  n.r_meas = 0.005 * 0.005;
  n.q_theta_diag = (1e-6 * nominal_theta(cell).as_vector()).cwiseAbs2();
  return n;
}

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::ConfigInvalid, "top level must be a JSON object");
  const Node root(doc, "");

  RunConfig cfg;
  const double version = root.number("version");
  if (version != kConfigVersion) fail("version", "must be " + std::to_string(kConfigVersion));
  cfg.version = kConfigVersion;
  cfg.seed = root.unsigned_integer("seed");
  cfg.cell = read_cell(root.child("cell"));

  cfg.noise = default_noise(cfg.cell);
  if (root.has("noise")) {
    const Node n = root.child("noise");
    if (n.has("q_state_diag")) cfg.noise.q_state_diag = n.vector5("q_state_diag");
    cfg.noise.r_meas = n.number_or("r_meas", cfg.noise.r_meas);
    if (n.has("q_theta_diag")) cfg.noise.q_theta_diag = n.vector5("q_theta_diag");
    if (!(cfg.noise.q_state_diag.array() > 0.0).all()) fail("noise.q_state_diag", "entries must be > 0");
    if (!(cfg.noise.q_theta_diag.array() >= 0.0).all()) fail("noise.q_theta_diag", "entries must be >= 0");
    if (!(cfg.noise.r_meas > 0.0)) fail("noise.r_meas", "must be > 0");
  }

  if (root.has("truth")) {
    const Node t = root.child("truth");
    cfg.truth.noise_std_v = t.number_or("measurement_noise_std_v", cfg.truth.noise_std_v);
    cfg.truth.theta_mismatch = t.number_or("theta_mismatch", cfg.truth.theta_mismatch);
    if (t.has("process_noise_std")) cfg.truth.process_noise_std = t.vector5("process_noise_std");
    if (!(cfg.truth.noise_std_v >= 0.0)) fail("truth.measurement_noise_std_v", "must be >= 0");
    if (!(std::abs(cfg.truth.theta_mismatch) < 0.5)) fail("truth.theta_mismatch", "must lie in (-0.5, 0.5)");
    if (cfg.truth.process_noise_std && !(cfg.truth.process_noise_std->array() >= 0.0).all()) {
      fail("truth.process_noise_std", "entries must be >= 0");
    }
  }

  cfg.filter.p0_state_diag << 1e-4, 1e-8, 1e-8, 1e-2, 1e-2;
  cfg.filter.p0_theta_rel_std = Vector5::Constant(0.01);
  if (root.has("filter")) {
    const Node f = root.child("filter");
    if (f.has("p0_state_diag")) cfg.filter.p0_state_diag = f.vector5("p0_state_diag");
    if (f.has("p0_theta_rel_std")) cfg.filter.p0_theta_rel_std = f.vector5("p0_theta_rel_std");
    cfg.filter.kappa = f.number_or("kappa", cfg.filter.kappa);
    if (f.has("n_recompute")) cfg.filter.n_recompute = static_cast<int>(f.unsigned_integer("n_recompute"));
    cfg.filter.joseph_form = f.boolean_or("joseph_form", cfg.filter.joseph_form);
    if (f.has("lyapunov_q_diag")) cfg.filter.lyapunov_q_diag = f.vector5("lyapunov_q_diag");
    if (!(cfg.filter.p0_state_diag.array() >= 0.0).all()) fail("filter.p0_state_diag", "entries must be >= 0");
    if (!(cfg.filter.p0_theta_rel_std.array() >= 0.0).all()) fail("filter.p0_theta_rel_std", "entries must be >= 0");
    if (!(cfg.filter.kappa >= 0.0 && cfg.filter.kappa <= 0.1)) fail("filter.kappa", "must lie in [0, 0.1]");
    if (cfg.filter.n_recompute < 1) fail("filter.n_recompute", "must be >= 1");
    if (cfg.filter.lyapunov_q_diag && !(cfg.filter.lyapunov_q_diag->array() > 0.0).all()) {
      fail("filter.lyapunov_q_diag", "entries must be > 0");
    }
  }

  if (!root.has("scenarios") || !doc.at("scenarios").is_array()) fail("scenarios", "must be an array");
  const json& list = doc.at("scenarios");
  if (list.empty()) fail("scenarios", "must not be empty");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "scenarios[" + std::to_string(i) + "]";
    if (!list[i].is_object()) fail(path, "must be an object");
    cfg.scenarios.push_back(read_scenario(Node(list[i], path), cfg.cell.dt, base_dir));
    for (std::size_t j = 0; j < i; ++j) {
      if (cfg.scenarios[j].name == cfg.scenarios[i].name) fail(path + ".name", "duplicates an earlier scenario");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto parent = std::filesystem::path(path).parent_path();
  return parse_config(buf.str(), parent.empty() ? "." : parent.string());
}

std::string serialize_config(const RunConfig& cfg) {
  const CellParameters& c = cfg.cell;
  json cell = {
      {"q_all", c.q_all},     {"c_ref", c.c_ref},   {"peukert_n", c.peukert_n},
      {"d_p", c.d_p},         {"d_n", c.d_n},       {"tau_sp", c.tau_sp},
      {"tau_sn", c.tau_sn},   {"g_p", c.g_p},       {"g_n", c.g_n},
      {"tau_e", c.tau_e},     {"p_con_a", c.p_con_a}, {"p_con_b", c.p_con_b},
      {"t_plus", c.t_plus},   {"c0", c.c0},         {"temperature_k", c.temperature_k},
      {"v_p", c.v_p},         {"v_n", c.v_n},       {"p_rxn_p", c.p_rxn_p},
      {"p_rxn_n", c.p_rxn_n}, {"r_ohm", c.r_ohm},   {"x_sp0", c.x_sp0},
      {"x_sn0", c.x_sn0},     {"dt", c.dt},         {"ocv_p", ocv_json(c.ocv_p)},
      {"ocv_n", ocv_json(c.ocv_n)},
  };
  json truth = {{"measurement_noise_std_v", cfg.truth.noise_std_v}, {"theta_mismatch", cfg.truth.theta_mismatch}};
  if (cfg.truth.process_noise_std) truth["process_noise_std"] = vec_json(*cfg.truth.process_noise_std);
  json filter = {{"p0_state_diag", vec_json(cfg.filter.p0_state_diag)},
                 {"p0_theta_rel_std", vec_json(cfg.filter.p0_theta_rel_std)},
                 {"kappa", cfg.filter.kappa},
                 {"n_recompute", cfg.filter.n_recompute},
                 {"joseph_form", cfg.filter.joseph_form}};
  if (cfg.filter.lyapunov_q_diag) filter["lyapunov_q_diag"] = vec_json(*cfg.filter.lyapunov_q_diag);

  json scenarios = json::array();
  for (const auto& s : cfg.scenarios) {
    json profile = {{"kind", std::string(to_string(s.profile.kind))}};
    switch (s.profile.kind) {
      case ProfileKind::Constant:
        profile["duration_s"] = s.profile.duration_s;
        profile["amplitude_a"] = s.profile.amplitude_a;
        break;
      case ProfileKind::PulseDynamic:
        profile["duration_s"] = s.profile.duration_s;
        profile["seed"] = s.profile.seed;
        profile["one_c_a"] = s.profile.one_c_a;
        break;
      case ProfileKind::FromFile:
        profile["file"] = s.profile_file;
        break;
    }
    json algos = json::array();
    for (auto a : s.algorithms) algos.push_back(std::string(to_string(a)));
    scenarios.push_back({{"name", s.name},
                         {"profile", profile},
                         {"initial_soc", s.initial_soc},
                         {"init_soc_error_pct", s.init_soc_errors_pct},
                         {"algorithms", algos}});
  }

  json doc = {{"version", cfg.version},
              {"seed", cfg.seed},
              {"cell", cell},
              {"noise",
               {{"q_state_diag", vec_json(cfg.noise.q_state_diag)},
                {"r_meas", cfg.noise.r_meas},
                {"q_theta_diag", vec_json(cfg.noise.q_theta_diag)}}},
              {"truth", truth},
              {"filter", filter},
              {"scenarios", scenarios}};
  return doc.dump(2) + "\n";
}

EstimatorSetup make_estimator_setup(const RunConfig& cfg) {
  EstimatorSetup s;
  s.noise = cfg.noise.to_noise_config();
  s.p0_state_diag = cfg.filter.p0_state_diag;
  s.p0_theta_rel_std = cfg.filter.p0_theta_rel_std;
  s.options.kappa = cfg.filter.kappa;
  s.options.n_recompute = cfg.filter.n_recompute;
  s.options.filter.covariance_form = cfg.filter.joseph_form ? CovarianceForm::Joseph : CovarianceForm::Short;
  if (cfg.filter.lyapunov_q_diag) s.options.lyapunov_q = Matrix5(cfg.filter.lyapunov_q_diag->asDiagonal());
  return s;
}

std::uint64_t scenario_seed(const RunConfig& cfg, std::size_t index) {
  return cfg.seed * 1000003ull + static_cast<std::uint64_t>(index);
}

}  // namespace sgdkf
