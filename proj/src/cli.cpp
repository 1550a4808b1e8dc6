#include "sgdkf/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgdkf/csv.hpp"
#include "sgdkf/error.hpp"

namespace sgdkf::cli {

using nlohmann::json;

std::string truth_csv(const TruthTrace& trace) {
  CsvWriter w(kTruthHeader);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    w.cell(trace.time_s[k])
        .cell(trace.current_a[k])
        .cell(trace.true_soc[k])
        .cell(trace.clean_voltage[k])
        .cell(trace.measured_voltage[k])
        .end_row();
  }
  return w.str();
}

std::string records_csv(const std::vector<StepRecord>& records, const TruthTrace& trace) {
  CsvWriter w(kRecordHeader);
  for (const auto& r : records) {
    const auto k = static_cast<std::size_t>(r.step);
    const double soc_true = trace.true_soc.at(k);
    w.cell(r.step)
        .cell(r.time_s)
        .cell(r.current_a)
        .cell(r.measured_v)
        .cell(soc_true)
        .cell(r.soc_est())
        .cell(100.0 * (r.soc_est() - soc_true))
        .cell(r.innovation)
        .cell(r.delta)
        .cell(static_cast<long>(r.sigma));
    for (int i = 0; i < 5; ++i) w.cell(r.theta(i));
    w.end_row();
  }
  return w.str();
}

TruthTrace simulate_scenario(const RunConfig& cfg, std::size_t index) {
  const ScenarioSpec& s = cfg.scenarios.at(index);
  const std::vector<double> profile = generate_profile(s.profile);
  return simulate_truth(profile, nominal_theta(cfg.cell), cfg.cell, s.initial_soc, cfg.truth.noise_std_v,
                        scenario_seed(cfg, index), cfg.truth.process_noise_std);
}

namespace {

struct Invocation {
  std::string config_path;
  std::string out_dir = ".";
  std::string algo;
  std::string param;
  std::vector<std::string> values;
};

RunConfig load_with_env(const std::string& path) {
  RunConfig cfg = load_config(path);
  if (const char* env = std::getenv("SGDKF_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Error(ErrorKind::ConfigInvalid, "SGDKF_SEED must be an unsigned integer");
    cfg.seed = seed;
  }
  return cfg;
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string run_label(const ScenarioSpec& s, double err, Algorithm algo) {
  return s.name + "_" + format_double(err) + "_" + std::string(to_string(algo));
}

std::vector<Algorithm> algorithms_for(const ScenarioSpec& s, const std::string& algo_flag) {
  if (algo_flag.empty()) return s.algorithms;
  if (algo_flag == "both") return {Algorithm::DualEkf, Algorithm::SgDkf};
  return {parse_algorithm(algo_flag)};
}

json constants_json(const std::optional<StabilityConstants>& c) {
  if (!c) return nullptr;
  return {{"alpha", c->alpha},
          {"beta", c->beta},
          {"epsilon", c->epsilon},
          {"lambda_min_q", c->lambda_min_q},
          {"norm_i_plus_p", c->norm_i_plus_p},
          {"spectral_radius_a", c->spectral_radius_a},
          {"damped", c->damped}};
}

void summary_cells(CsvWriter& w, const ScenarioSpec& s, double err, Algorithm algo, const RunMetrics& m) {
  w.cell(std::string_view(s.name))
      .cell(err)
      .cell(to_string(algo))
      .cell(m.rmse_soc_pct)
      .cell(m.max_abs_err_pct)
      .cell(m.convergence_step)
      .cell(m.freeze_fraction);
}

struct BatchResult {
  bool diverged = false;
};

// Runs every scenario x error x algorithm of cfg, appending summary rows.
// Record CSVs are written when records_dir is set.
BatchResult run_batch(const RunConfig& cfg, const std::string& algo_flag,
                      const std::optional<std::vector<double>>& error_override,
                      const std::optional<std::string>& records_dir,
                      const std::function<void(const ScenarioSpec&, double, Algorithm, const EstimatorRun&)>& sink,
                      std::ostream& err) {
  BatchResult result;
  const EstimatorSetup setup = make_estimator_setup(cfg);
  for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
    const ScenarioSpec& s = cfg.scenarios[i];
    const TruthTrace trace = simulate_scenario(cfg, i);
    if (trace.size() == 0) throw Error(ErrorKind::BadSpec, "scenario " + s.name + " produced an empty trace");
    for (double e : error_override.value_or(s.init_soc_errors_pct)) {
      for (Algorithm algo : algorithms_for(s, algo_flag)) {
        const EstimatorRun run = run_estimator(trace, algo, e, cfg.truth.theta_mismatch, cfg.cell, setup);
        if (run.diverged) {
          result.diverged = true;
          err << "sgdkf: " << run_label(s, e, algo) << ": " << run.failure << "\n";
        }
        if (records_dir) {
          write_file_atomic(out_path(*records_dir, "records_" + run_label(s, e, algo) + ".csv"),
                            records_csv(run.records, trace));
        }
        sink(s, e, algo, run);
      }
    }
  }
  return result;
}

int cmd_simulate(const Invocation& inv, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_with_env(inv.config_path);
  for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
    const TruthTrace trace = simulate_scenario(cfg, i);
    const std::string path = out_path(inv.out_dir, "truth_" + cfg.scenarios[i].name + ".csv");
    write_file_atomic(path, truth_csv(trace));
    out << path << (trace.terminated_early ? " (terminated early: SOC exhausted)" : "") << "\n";
  }
  return kOk;
}

int cmd_estimate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_with_env(inv.config_path);
  CsvWriter summary(kSummaryHeader);
  json meta = json::array();
  const BatchResult res = run_batch(
      cfg, inv.algo, std::nullopt, inv.out_dir,
      [&](const ScenarioSpec& s, double e, Algorithm algo, const EstimatorRun& run) {
        summary_cells(summary, s, e, algo, run.metrics);
        summary.end_row();
        meta.push_back({{"run", run_label(s, e, algo)},
                        {"diverged", run.diverged},
                        {"failure", run.failure},
                        {"stability", constants_json(run.constants)}});
      },
      err);
  write_file_atomic(out_path(inv.out_dir, "summary.csv"), summary.str());
  write_file_atomic(out_path(inv.out_dir, "metadata.json"), meta.dump(2) + "\n");
  out << summary.str();
  return res.diverged ? kDivergence : kOk;
}

RunConfig apply_sweep(RunConfig cfg, const std::string& param, double value) {
  auto require = [&](bool ok) {
    if (!ok) {
      throw Error(ErrorKind::ConfigInvalid,
                  "sweep value " + format_double(value) + " is out of range for '" + param + "'");
    }
  };
  if (param == "kappa") {
    require(value >= 0.0 && value <= 0.1);
    cfg.filter.kappa = value;
  } else if (param == "r_scale") {
    require(value > 0.0);
    cfg.noise.r_meas *= value;
  } else if (param == "q_scale") {
    require(value > 0.0);
    cfg.noise.q_state_diag *= value;
  } else if (param == "q_theta_scale") {
    require(value >= 0.0);
    cfg.noise.q_theta_diag *= value;
  } else if (param == "meas_noise_std") {
    require(value >= 0.0);
    cfg.truth.noise_std_v = value;
  } else if (param == "theta_mismatch") {
    require(std::abs(value) < 0.5);
    cfg.truth.theta_mismatch = value;
  } else if (param == "init_soc_err") {
    require(value >= 0.0 && value <= 100.0);
  }
  return cfg;
}

int cmd_sweep(const Invocation& inv, std::ostream& out, std::ostream& err) {
  if (std::find(kSweepParams.begin(), kSweepParams.end(), inv.param) == kSweepParams.end()) {
    throw Error(ErrorKind::ConfigInvalid, "unknown sweep parameter '" + inv.param + "'");
  }
  if (inv.values.empty()) throw Error(ErrorKind::ConfigInvalid, "--values must not be empty");
  std::vector<double> values;
  for (const std::string& token : inv.values) {
    if (token.empty()) throw Error(ErrorKind::ConfigInvalid, "--values contains an empty entry");
    try {
      values.push_back(parse_double(token, "--values"));
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigInvalid, e.what());
    }
  }
  const RunConfig base = load_with_env(inv.config_path);
  for (double v : values) apply_sweep(base, inv.param, v);  // reject bad values before any run

  std::vector<std::string> header{"param", "value"};
  header.insert(header.end(), kSummaryHeader.begin(), kSummaryHeader.end());
  CsvWriter table(header);
  json meta = json::array();
  bool diverged = false;
  for (double v : values) {
    const RunConfig cfg = apply_sweep(base, inv.param, v);
    std::optional<std::vector<double>> errors;
    if (inv.param == "init_soc_err") errors = std::vector<double>{v};
    const BatchResult res = run_batch(
        cfg, inv.algo, errors, std::nullopt,
        [&](const ScenarioSpec& s, double e, Algorithm algo, const EstimatorRun& run) {
          table.cell(std::string_view(inv.param)).cell(v);
          summary_cells(table, s, e, algo, run.metrics);
          table.end_row();
          meta.push_back({{"param", inv.param},
                          {"value", v},
                          {"run", run_label(s, e, algo)},
                          {"diverged", run.diverged},
                          {"stability", constants_json(run.constants)}});
        },
        err);
    diverged = diverged || res.diverged;
  }
  write_file_atomic(out_path(inv.out_dir, "sweep.csv"), table.str());
  write_file_atomic(out_path(inv.out_dir, "sweep_metadata.json"), meta.dump(2) + "\n");
  out << table.str();
  return diverged ? kDivergence : kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability-gated dual Kalman filter for electrochemical SOC estimation"};
  app.require_subcommand(1);
  Invocation inv;

  auto* simulate = app.add_subcommand("simulate", "Write the truth trace of every scenario");
  simulate->add_option("config", inv.config_path, "JSON run configuration")->required();
  simulate->add_option("--out", inv.out_dir, "Output directory");

  auto* estimate = app.add_subcommand("estimate", "Run the estimators and write records and a summary");
  estimate->add_option("config", inv.config_path, "JSON run configuration")->required();
  estimate->add_option("--algo", inv.algo, "dual_ekf, sg_dkf or both (default: per scenario)")
      ->check(CLI::IsMember({"dual_ekf", "sg_dkf", "both"}));
  estimate->add_option("--out", inv.out_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Repeat the estimate batch over values of one parameter");
  sweep->add_option("config", inv.config_path, "JSON run configuration")->required();
  sweep->add_option("--param", inv.param, "One of: init_soc_err, kappa, r_scale, q_scale, q_theta_scale, "
                                          "meas_noise_std, theta_mismatch")
      ->required();
  sweep->add_option("--values", inv.values, "Comma-separated values")->delimiter(',');
  sweep->add_option("--algo", inv.algo, "dual_ekf, sg_dkf or both (default: per scenario)")
      ->check(CLI::IsMember({"dual_ekf", "sg_dkf", "both"}));
  sweep->add_option("--out", inv.out_dir, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(inv, out, err);
    if (*estimate) return cmd_estimate(inv, out, err);
    return cmd_sweep(inv, out, err);
  } catch (const Error& e) {
    err << "sgdkf: " << e.what() << "\n";
    return e.kind() == ErrorKind::ConfigInvalid ? kConfigError : kModelError;
  } catch (const std::exception& e) {
    err << "sgdkf: " << e.what() << "\n";
    return kModelError;
  }
}

}  // namespace sgdkf::cli
