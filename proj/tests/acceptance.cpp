// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sgdkf/cli.hpp"
#include "sgdkf/config.hpp"
#include "sgdkf/csv.hpp"
#include "sgdkf/numerics.hpp"
#include "sgdkf/scenario.hpp"
#include "sgdkf/supervisor.hpp"
#include "test_support.hpp"

using namespace sgdkf;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) { return format_double(v); }

struct SuiteRun {
  std::string scenario;
  double init_err = 0.0;
  Algorithm algo = Algorithm::SgDkf;
  EstimatorRun run;
  ThetaEstimate theta0;
};

// The default-config suite, exactly as `sgdkf estimate` runs it.
struct Suite {
  std::vector<SuiteRun> runs;
  std::vector<TruthTrace> traces;
  double seconds = 0.0;
};

const Suite& default_suite() {
  static const Suite suite = [] {
    Suite s;
    const RunConfig& cfg = testing_support::default_config();
    const EstimatorSetup setup = make_estimator_setup(cfg);
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
      const ScenarioSpec& spec = cfg.scenarios[i];
      const TruthTrace trace = cli::simulate_scenario(cfg, i);
      for (double e : spec.init_soc_errors_pct) {
        for (Algorithm algo : spec.algorithms) {
          SuiteRun r{spec.name, e, algo, run_estimator(trace, algo, e, cfg.truth.theta_mismatch, cfg.cell, setup), {}};
          r.theta0.mean = perturb_theta(trace.truth_theta, cfg.truth.theta_mismatch).as_vector();
          r.theta0.covariance = setup.p0_theta_rel_std.cwiseProduct(r.theta0.mean).cwiseAbs2().asDiagonal();
          s.runs.push_back(std::move(r));
        }
      }
      s.traces.push_back(trace);
    }
    s.seconds = seconds_since(t0);
    return s;
  }();
  return suite;
}

const SuiteRun* find_run(const std::string& scenario, double err, Algorithm algo) {
  for (const SuiteRun& r : default_suite().runs) {
    if (r.scenario == scenario && r.init_err == err && r.algo == algo) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

Verdict lyapunov_solver() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_real_distribution<double> radius(0.0, 0.99);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::MatrixXd> cases;
  for (int t = 0; t < 100; ++t) {
    const int n = dim(rng);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    const double rho = Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().cwiseAbs().maxCoeff();
    cases.push_back(a * (radius(rng) / rho));
  }
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& a : cases) {
    const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const Eigen::MatrixXd p = numerics::solve_discrete_lyapunov(a, q);
    worst = std::max(worst, (a.transpose() * p * a - p + q).norm());
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-8 && elapsed < 1.0,
          "worst residual " + num(worst) + " (<= 1e-8), 100 solves in " + num(elapsed) + " s (< 1 s)"};
}

// Steps the gated filter over a zero-noise 1C trace from a 30% SOC error and a
// 5% theta mismatch, and at every step where the proxy condition holds checks
// V_{k+1} - V_k <= -alpha |z_k|^2 + beta |w_k|^2 for z = x_true - x_hat.
struct Audit {
  long audited = 0;
  long violations = 0;
  double worst_margin = 0.0;  // most negative (rhs - lhs) / scale seen on audited steps
};

Audit descent_audit(const std::optional<Matrix5>& lyapunov_q) {
  const RunConfig& cfg = testing_support::default_config();
  const CellParameters& p = cfg.cell;
  const std::vector<double> profile(1000, p.q_all / 3600.0);
  const TruthTrace trace = simulate_truth(profile, nominal_theta(p), p, 1.0, 0.0, 1);

  EstimatorSetup setup = make_estimator_setup(cfg);
  setup.options.lyapunov_q = lyapunov_q;
  StateEstimate x0;
  x0.mean = ElectrochemicalState{0.7, 0.0, 0.0, 0.0, 0.0}.as_vector();
  x0.covariance = setup.p0_state_diag.asDiagonal();
  ThetaEstimate t0;
  t0.mean = perturb_theta(nominal_theta(p), cfg.truth.theta_mismatch).as_vector();
  t0.covariance = setup.p0_theta_rel_std.cwiseProduct(t0.mean).cwiseAbs2().asDiagonal();
  SgDkfSession session = make_session(x0, t0, setup.noise, std::make_shared<const CellParameters>(p), setup.options);

  std::vector<Vector5> z;
  std::vector<StabilityConstants> constants;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    auto [next, rec] = sg_dkf_step(session, trace.current_a[k], trace.measured_voltage[k]);
    session = std::move(next);
    z.push_back(trace.true_state[k].as_vector() - rec.state_mean);
    constants.push_back(*session.constants);
  }

  Audit audit;
  for (std::size_t k = 0; k + 1 < z.size(); ++k) {
    const StabilityConstants& c = constants[k];
    const Eigen::VectorXd zk = z[k];
    const Eigen::VectorXd zn = z[k + 1];
    const Eigen::VectorXd w = zn - c.a_used * zk;
    const double z2 = zk.squaredNorm();
    const double w2 = w.squaredNorm();
    if (!(w2 < (c.alpha / c.beta) * z2)) continue;
    ++audit.audited;
    const double v_k = zk.dot(c.p_lyap * zk);
    const double v_n = zn.dot(c.p_lyap * zn);
    const double lhs = v_n - v_k;
    const double rhs = -c.alpha * z2 + c.beta * w2;
    // Rounding allowance: a few ulps of the largest term in the comparison.
    const double scale = std::max({std::abs(v_k), std::abs(v_n), c.alpha * z2, c.beta * w2});
    const double margin = (rhs - lhs) / scale;
    audit.worst_margin = audit.audited == 1 ? margin : std::min(audit.worst_margin, margin);
    if (lhs > rhs + 64.0 * std::numeric_limits<double>::epsilon() * scale) ++audit.violations;
  }
  return audit;
}

Verdict descent_inequality() {
  const Audit process_q = descent_audit(std::nullopt);
  const Audit unit_q = descent_audit(Matrix5::Identity());
  const bool pass = process_q.violations == 0 && unit_q.violations == 0 && unit_q.audited + process_q.audited > 0;
  std::ostringstream d;
  d << "Q = process noise: " << process_q.audited << " steps audited, " << process_q.violations
    << " violations; Q = I: " << unit_q.audited << " audited, " << unit_q.violations
    << " violations (worst relative margin " << num(unit_q.worst_margin) << ")";
  return {pass, d.str()};
}

Verdict nominal_exactness() {
  const RunConfig& cfg = testing_support::default_config();
  const CellParameters& p = cfg.cell;
  const TruthTrace trace =
      simulate_truth(std::vector<double>(1000, p.q_all / 3600.0), nominal_theta(p), p, 1.0, 0.0, 1);
  const EstimatorSetup setup = make_estimator_setup(cfg);
  bool pass = true;
  std::ostringstream d;
  for (Algorithm algo : {Algorithm::DualEkf, Algorithm::SgDkf}) {
    const EstimatorRun run = run_estimator(trace, algo, 0.0, 0.0, p, setup);
    double worst_e = 0.0;
    for (const StepRecord& r : run.records) worst_e = std::max(worst_e, std::abs(r.innovation));
    const bool ok = !run.diverged && run.records.size() == 1000 && run.metrics.rmse_soc_pct <= 1e-6 &&
                    worst_e <= 1e-9;
    pass = pass && ok;
    d << to_string(algo) << " rmse " << num(run.metrics.rmse_soc_pct) << " %, max|E| " << num(worst_e) << " V; ";
  }
  return {pass, d.str()};
}

Verdict table_one_structure() {
  const Suite& suite = default_suite();
  bool pass = suite.seconds < 60.0 && suite.runs.size() == 8;
  std::ostringstream d;
  for (const char* name : {"UDDS", "1C"}) {
    const SuiteRun* d0 = find_run(name, 0.0, Algorithm::DualEkf);
    const SuiteRun* s0 = find_run(name, 0.0, Algorithm::SgDkf);
    const SuiteRun* d30 = find_run(name, 30.0, Algorithm::DualEkf);
    const SuiteRun* s30 = find_run(name, 30.0, Algorithm::SgDkf);
    if (!d0 || !s0 || !d30 || !s30) return {false, std::string("scenario ") + name + " missing from default config"};
    const double gap = std::abs(s0->run.metrics.rmse_soc_pct - d0->run.metrics.rmse_soc_pct);
    const double ratio = s30->run.metrics.rmse_soc_pct / d30->run.metrics.rmse_soc_pct;
    const bool any_diverged = d0->run.diverged || s0->run.diverged || d30->run.diverged || s30->run.diverged;
    pass = pass && gap <= 0.1 && ratio <= 0.7 && !any_diverged;
    d << name << ": 0% dual " << num(d0->run.metrics.rmse_soc_pct) << " / sg " << num(s0->run.metrics.rmse_soc_pct)
      << " (gap " << num(gap) << " pp); 30% dual " << num(d30->run.metrics.rmse_soc_pct) << " / sg "
      << num(s30->run.metrics.rmse_soc_pct) << " (ratio " << num(ratio) << "); ";
  }
  d << "suite " << num(suite.seconds) << " s";
  return {pass, d.str()};
}

Verdict dead_zone_behavior() {
  bool pass = true;
  std::ostringstream d;
  int checked = 0;
  for (const SuiteRun& r : default_suite().runs) {
    if (r.algo != Algorithm::SgDkf || r.init_err != 30.0) continue;
    ++checked;
    const auto& recs = r.run.records;
    const std::size_t early = std::min<std::size_t>(500, recs.size());
    const long early_freezes = std::count_if(recs.begin(), recs.begin() + static_cast<long>(early),
                                             [](const StepRecord& x) { return x.sigma == 0; });
    const std::size_t tail_start = recs.size() - recs.size() / 5;
    const long tail_open = std::count_if(recs.begin() + static_cast<long>(tail_start), recs.end(),
                                         [](const StepRecord& x) { return x.sigma == 1; });
    const double open_fraction = static_cast<double>(tail_open) / static_cast<double>(recs.size() - tail_start);
    pass = pass && early_freezes >= 1 && open_fraction >= 0.9;
    d << r.scenario << ": " << early_freezes << " freezes in first 500 steps, gate open on "
      << num(100.0 * open_fraction) << "% of final 20%; ";
  }
  return {pass && checked == 2, d.str()};
}

Verdict jacobian_fidelity() {
  const CellParameters& p = testing_support::default_cell();
  const ThetaVector th = nominal_theta(p);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Matrix5 analytic = jacobian_A(p);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const ElectrochemicalState s{0.05 + 0.95 * u(rng), 2e-3 * (u(rng) - 0.5), 2e-3 * (u(rng) - 0.5),
                                 200.0 * (u(rng) - 0.5), 200.0 * (u(rng) - 0.5)};
    const Matrix5 fd = jacobian_A_numeric(s, th, p, -5.8 + 14.5 * u(rng));
    const Matrix5 rel = (fd - analytic).cwiseAbs().cwiseQuotient(analytic.cwiseAbs().cwiseMax(1.0));
    worst = std::max(worst, rel.maxCoeff());
  }

  // Step-halving on smooth directions of h: electrolyte state and capacity.
  const ElectrochemicalState s{0.55, 1e-4, -1e-4, 300.0, 250.0};
  const double exact_dc1 = -thermal_voltage_2rt_over_f(p) * (1.0 - p.t_plus) / (p.c0 + s.dc1);
  auto err_dc1 = [&](double h) { return std::abs(jacobian_C(s, th, p, 2.9, h)(3) - exact_dc1); };
  const double ratio_state = err_dc1(4e-3) / err_dc1(2e-3);
  auto ctheta_q = [&](double h) { return jacobian_Ctheta(s, th, p, 2.9, h)(2); };
  // Richardson: the difference between successive estimates shrinks 4x per halving.
  const double ratio_theta =
      std::abs(ctheta_q(8e-3) - ctheta_q(4e-3)) / std::abs(ctheta_q(4e-3) - ctheta_q(2e-3));
  const bool order2 = std::abs(ratio_state - 4.0) < 0.2 && std::abs(ratio_theta - 4.0) < 0.2;
  return {worst <= 1e-6 && order2, "worst relative deviation of A over 50 points " + num(worst) +
                                       "; error ratio per step halving " + num(ratio_state) + " (state), " +
                                       num(ratio_theta) + " (theta)"};
}

Verdict model_fixed_points() {
  CellParameters p = testing_support::default_cell();
  const ThetaVector th = nominal_theta(p);
  const double i = 2.9;
  ElectrochemicalState s{1.0, 0.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < static_cast<int>(10.0 * p.tau_e / p.dt); ++k) s = step_state(s, th, p, i);
  const double dc1_rel = std::abs(s.dc1 - p.p_con_a * i) / (p.p_con_a * i);
  const double dc2_rel = std::abs(s.dc2 - p.p_con_b * i) / (p.p_con_b * i);

  bool peukert = effective_capacity(p, th, th.q_all / 3600.0 * p.c_ref) == th.q_all;
  p.peukert_n = 1.0;
  for (double amps : {0.05, 1.0, 2.9, 8.7, -5.8}) peukert = peukert && effective_capacity(p, th, amps) == th.q_all;

  // Coulomb counting against an independently summed charge over the UDDS surrogate.
  const RunConfig& cfg = testing_support::default_config();
  const std::vector<double> profile = generate_profile(cfg.scenarios.front().profile);
  const CellParameters& q = cfg.cell;
  ElectrochemicalState x{1.0, 0.0, 0.0, 0.0, 0.0};
  long double charge = 0.0L;
  double worst = 0.0;
  for (double amps : profile) {
    x = step_state(x, th, q, amps);
    charge += static_cast<long double>(amps) * q.dt;
    const double expected = static_cast<double>(1.0L - charge / th.q_all);
    worst = std::max(worst, std::abs(x.soc - expected) / std::max(std::abs(expected), 1e-300));
  }
  const bool pass = dc1_rel <= 0.01 && dc2_rel <= 0.01 && peukert && worst <= 1e-12;
  return {pass, "electrolyte after 10 tau_e within " + num(100.0 * std::max(dc1_rel, dc2_rel)) +
                    "% of p_con I; Peukert identities " + (peukert ? "exact" : "NOT exact") +
                    "; coulomb counting worst relative error " + num(worst) + " over " +
                    std::to_string(profile.size()) + " steps"};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    files[entry.path().filename().string()] = buf.str();
  }
  return files;
}

int run_cli_suite(const fs::path& out) {
  std::ostringstream sink;
  const std::string cfg = testing_support::default_config_path();
  const int a = cli::run({"simulate", cfg, "--out", out.string()}, sink, sink);
  const int b = cli::run({"estimate", cfg, "--algo", "both", "--out", out.string()}, sink, sink);
  return a != 0 ? a : b;
}

Verdict determinism() {
  const fs::path a = testing_support::scratch_dir("acceptance_a");
  const fs::path b = testing_support::scratch_dir("acceptance_b");
  const int ca = run_cli_suite(a);
  const int cb = run_cli_suite(b);
  const auto fa = csv_files(a);
  const auto fb = csv_files(b);
  std::size_t bytes = 0;
  for (const auto& [name, text] : fa) bytes += text.size();
  const bool pass = ca == 0 && cb == 0 && fa.size() == 11 && fa == fb;
  return {pass, std::to_string(fa.size()) + " CSV files (" + std::to_string(bytes) + " bytes) " +
                    (fa == fb ? "byte-identical" : "DIFFER") + " across two invocations; exit codes " +
                    std::to_string(ca) + ", " + std::to_string(cb)};
}

// In-memory records (theta and its covariance) plus the emitted CSV rows.
Verdict freeze_and_gate_invariants() {
  long records = 0;
  long freezes = 0;
  long bad = 0;
  for (const SuiteRun& r : default_suite().runs) {
    ThetaEstimate prev = r.theta0;
    for (const StepRecord& rec : r.run.records) {
      ++records;
      const bool open = std::abs(rec.innovation) < rec.delta;
      if ((rec.sigma == 1) != open) ++bad;
      if (r.algo == Algorithm::DualEkf && rec.sigma != 1) ++bad;
      if (rec.sigma == 0) {
        ++freezes;
        if (rec.theta != prev.mean || rec.theta_covariance != prev.covariance) ++bad;
      }
      prev = {rec.theta, rec.theta_covariance};
    }
  }

  const fs::path dir = testing_support::scratch_dir("acceptance_records");
  const int code = run_cli_suite(dir);
  long rows = 0;
  for (const auto& [name, text] : csv_files(dir)) {
    if (name.rfind("records_", 0) != 0) continue;
    const CsvTable t = parse_csv(text);
    const auto col = [&](const char* h) {
      return static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), h) - t.header.begin());
    };
    const std::size_t e = col("innovation_v"), delta = col("delta_k"), sigma = col("sigma"), th0 = col("theta_dp");
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
      ++rows;
      const auto& row = t.rows[k];
      const bool open = std::abs(parse_double(row[e], name)) < parse_double(row[delta], name);
      if ((row[sigma] == "1") != open) ++bad;
      if (row[sigma] == "0" && k > 0 && !std::equal(row.begin() + static_cast<long>(th0), row.end(),
                                                    t.rows[k - 1].begin() + static_cast<long>(th0))) {
        ++bad;
      }
    }
  }
  return {bad == 0 && code == 0 && records > 0 && rows == records,
          std::to_string(records) + " records (" + std::to_string(rows) + " emitted rows), " +
              std::to_string(freezes) + " freezes, " + std::to_string(bad) + " violations"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"Lyapunov solver residual on 100 random Schur matrices", lyapunov_solver},
      {"Descent inequality audit on a zero-noise 1C run", descent_inequality},
      {"Nominal exactness of both filters", nominal_exactness},
      {"Structural replication of the RMSE table on the twin", table_one_structure},
      {"Dead-zone freezes early and reopens after convergence", dead_zone_behavior},
      {"Jacobian fidelity and second-order finite differences", jacobian_fidelity},
      {"Model fixed points and coulomb counting", model_fixed_points},
      {"Deterministic CSV output", determinism},
      {"Freeze exactness and gate consistency on every record", freeze_and_gate_invariants},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << v.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
