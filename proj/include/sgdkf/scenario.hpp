#pragma once

// Digital-twin experiment harness: current profiles, truth simulation with
// measurement noise, estimator runs from perturbed initial guesses, and SOC
// error metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgdkf/battery_model.hpp"
#include "sgdkf/filters.hpp"
#include "sgdkf/supervisor.hpp"

namespace sgdkf {

enum class ProfileKind { Constant, PulseDynamic, FromFile };

std::string_view to_string(ProfileKind kind);
ProfileKind parse_profile_kind(std::string_view name);

struct CurrentProfile {
  ProfileKind kind = ProfileKind::Constant;
  double duration_s = 0.0;
  double dt = 1.0;
  double amplitude_a = 0.0;      // constant
  std::uint64_t seed = 0;        // pulse_dynamic
  double one_c_a = 2.9;          // pulse_dynamic amplitude scale
  std::vector<double> samples;   // from_file

  friend bool operator==(const CurrentProfile&, const CurrentProfile&) = default;
};

/// constant: flat; pulse_dynamic: seeded piecewise-constant 5-60 s segments in
/// [-2C, 3C] with regenerative duty capped at 20%; from_file: pass-through.
std::vector<double> generate_profile(const CurrentProfile& spec);

/// Reads a two-column `time_s,current_a` CSV (header required).
std::vector<double> read_profile_csv(const std::string& path);

struct TruthTrace {
  std::vector<double> time_s;
  std::vector<double> current_a;
  std::vector<double> true_soc;
  std::vector<ElectrochemicalState> true_state;
  std::vector<double> clean_voltage;
  std::vector<double> measured_voltage;
  ThetaVector truth_theta;
  ElectrochemicalState initial_state;
  bool terminated_early = false;

  std::size_t size() const { return time_s.size(); }
};

/// Sample k applies current_a[k] over ((k)dt, (k+1)dt] and records the state
/// and voltage at (k+1)dt. Stops early, flagged, once SOC drops below -0.05.
TruthTrace simulate_truth(std::span<const double> profile, const ThetaVector& truth_theta,
                          const CellParameters& params, double initial_soc, double noise_std_v, std::uint64_t seed,
                          const std::optional<Vector5>& process_noise_std = std::nullopt);

enum class Algorithm { DualEkf, SgDkf };

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

/// Everything the estimator may observe: the applied current and the measured
/// voltage per step.
struct MeasurementStream {
  std::span<const double> current_a;
  std::span<const double> measured_v;
};

MeasurementStream measurements_of(const TruthTrace& trace);

struct EstimatorSetup {
  NoiseConfig noise;
  Vector5 p0_state_diag = Vector5::Zero();
  Vector5 p0_theta_rel_std = Vector5::Zero();  // relative to the initial theta guess
  SessionOptions options;
};

/// Sign pattern applied to a relative theta perturbation.
inline const Vector5 kThetaPerturbationSigns = (Vector5() << 1.0, -1.0, 1.0, -1.0, 1.0).finished();

ThetaVector perturb_theta(const ThetaVector& theta, double relative_error);

struct RunMetrics {
  double rmse_soc_pct = 0.0;
  double max_abs_err_pct = 0.0;
  long convergence_step = -1;  // -1: never settles inside 1%
  double freeze_fraction = 0.0;
  std::size_t steps = 0;
  std::uint64_t trace_id = 0;
};

RunMetrics compute_metrics(std::span<const StepRecord> records, std::span<const double> true_soc,
                           std::uint64_t trace_id);

std::uint64_t trace_fingerprint(const TruthTrace& trace);

struct EstimatorRun {
  std::vector<StepRecord> records;
  RunMetrics metrics;
  bool diverged = false;
  std::string failure;
  std::optional<StabilityConstants> constants;
};

/// Steps one algorithm over the stream starting from
///   SOC = true_soc(0) (1 - init_soc_error_pct / 100), clamped to [0, 1],
///   theta = initial_theta.
EstimatorRun run_estimator(const MeasurementStream& stream, double initial_soc, const ThetaVector& initial_theta,
                           Algorithm algo, const CellParameters& params, const EstimatorSetup& setup);

/// Trace-level convenience: derives the initial guess from the trace's initial
/// SOC and truth theta, then scores against the trace's true SOC.
EstimatorRun run_estimator(const TruthTrace& trace, Algorithm algo, double init_soc_error_pct,
                           double init_theta_error, const CellParameters& params, const EstimatorSetup& setup);

struct Comparison {
  double rmse_reduction_pct = 0.0;  // (a - b) / a
  long convergence_speedup_steps = 0;
};

/// Relative improvement of b over a; both must come from the same trace.
Comparison compare(const RunMetrics& a, const RunMetrics& b);

}  // namespace sgdkf
