#include "sgdkf/scenario.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>

#include "sgdkf/csv.hpp"
#include "sgdkf/error.hpp"

namespace sgdkf {

std::string_view to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Constant: return "constant";
    case ProfileKind::PulseDynamic: return "pulse_dynamic";
    case ProfileKind::FromFile: return "from_file";
  }
  return "constant";
}

ProfileKind parse_profile_kind(std::string_view name) {
  if (name == "constant") return ProfileKind::Constant;
  if (name == "pulse_dynamic") return ProfileKind::PulseDynamic;
  if (name == "from_file") return ProfileKind::FromFile;
  throw Error(ErrorKind::BadSpec, "unknown profile kind '" + std::string(name) + "'");
}

std::string_view to_string(Algorithm algo) { return algo == Algorithm::DualEkf ? "dual_ekf" : "sg_dkf"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "dual_ekf") return Algorithm::DualEkf;
  if (name == "sg_dkf") return Algorithm::SgDkf;
  throw Error(ErrorKind::BadSpec, "unknown algorithm '" + std::string(name) + "'");
}

namespace {

std::size_t sample_count(const CurrentProfile& spec) {
  if (!(spec.dt > 0.0) || !(spec.duration_s > 0.0)) {
    throw Error(ErrorKind::BadSpec, "profile duration and dt must be positive");
  }
  const double ratio = spec.duration_s / spec.dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 10.0) {
    throw Error(ErrorKind::BadSpec, "duration_s / dt must be an integer of at least 10");
  }
  return static_cast<std::size_t>(rounded);
}

std::vector<double> pulse_dynamic(const CurrentProfile& spec, std::size_t n) {
  if (!(spec.one_c_a > 0.0)) throw Error(ErrorKind::BadSpec, "one_c_a must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> segment_seconds(5, 60);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> out;
  out.reserve(n);
  std::size_t regen_samples = 0;
  while (out.size() < n) {
    const auto len = static_cast<std::size_t>(std::max(1.0, std::round(segment_seconds(rng) / spec.dt)));
    const double pick = unit(rng);
    const double magnitude = unit(rng);
    double amp = 0.0;
    const bool regen_fits = 5 * (regen_samples + len) <= out.size() + len;
    if (pick < 0.15 && regen_fits) {
      amp = -2.0 * spec.one_c_a * (0.1 + 0.9 * magnitude);
      regen_samples += len;
    } else if (pick < 0.35) {
      amp = 0.0;
    } else {
      amp = 3.0 * spec.one_c_a * magnitude * magnitude;
    }
    const std::size_t take = std::min(len, n - out.size());
    if (amp < 0.0) regen_samples -= len - take;
    out.insert(out.end(), take, amp);
  }
  return out;
}

std::uint64_t fnv1a(std::uint64_t h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::vector<double> generate_profile(const CurrentProfile& spec) {
  switch (spec.kind) {
    case ProfileKind::Constant:
      if (!std::isfinite(spec.amplitude_a)) throw Error(ErrorKind::BadSpec, "amplitude must be finite");
      return std::vector<double>(sample_count(spec), spec.amplitude_a);
    case ProfileKind::PulseDynamic:
      return pulse_dynamic(spec, sample_count(spec));
    case ProfileKind::FromFile:
      if (spec.samples.size() < 10) throw Error(ErrorKind::BadSpec, "profile file needs at least 10 samples");
      for (double v : spec.samples) {
        if (!std::isfinite(v)) throw Error(ErrorKind::BadSpec, "profile file holds a non-finite current");
      }
      return spec.samples;
  }
  throw Error(ErrorKind::BadSpec, "unknown profile kind");
}

std::vector<double> read_profile_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::BadSpec, "cannot open profile file " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const CsvTable table = parse_csv(text);
  if (table.header != std::vector<std::string>{"time_s", "current_a"}) {
    throw Error(ErrorKind::BadSpec, path + ": header must be 'time_s,current_a'");
  }
  std::vector<double> samples;
  samples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    samples.push_back(parse_double(table.rows[i][1], path + " row " + std::to_string(i + 2)));
  }
  return samples;
}

TruthTrace simulate_truth(std::span<const double> profile, const ThetaVector& truth_theta,
                          const CellParameters& params, double initial_soc, double noise_std_v, std::uint64_t seed,
                          const std::optional<Vector5>& process_noise_std) {
  if (!(initial_soc >= 0.05 && initial_soc <= 1.0)) {
    throw Error(ErrorKind::BadSpec, "initial SOC must lie in [0.05, 1]");
  }
  if (!(noise_std_v >= 0.0)) throw Error(ErrorKind::BadSpec, "noise std must be >= 0");
  validate(params);
  validate(truth_theta);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> standard(0.0, 1.0);

  TruthTrace trace;
  trace.truth_theta = truth_theta;
  trace.initial_state = ElectrochemicalState{initial_soc, 0.0, 0.0, 0.0, 0.0};
  const std::size_t n = profile.size();
  trace.time_s.reserve(n);
  trace.current_a.reserve(n);
  trace.true_soc.reserve(n);
  trace.true_state.reserve(n);
  trace.clean_voltage.reserve(n);
  trace.measured_voltage.reserve(n);

  ElectrochemicalState state = trace.initial_state;
  for (std::size_t k = 0; k < n; ++k) {
    const double current = profile[k];
    state = step_state(state, truth_theta, params, current);
    if (process_noise_std) {
      Vector5 x = state.as_vector();
      for (int i = 0; i < 5; ++i) x(i) += (*process_noise_std)(i)*standard(rng);
      state = ElectrochemicalState::from_vector(x);
    }
    if (state.soc < -0.05) {
      trace.terminated_early = true;
      break;
    }
    const double clean = terminal_voltage(state, truth_theta, params, current);
    trace.time_s.push_back(static_cast<double>(k + 1) * params.dt);
    trace.current_a.push_back(current);
    trace.true_soc.push_back(state.soc);
    trace.true_state.push_back(state);
    trace.clean_voltage.push_back(clean);
    trace.measured_voltage.push_back(noise_std_v > 0.0 ? clean + noise_std_v * standard(rng) : clean);
  }
  return trace;
}

MeasurementStream measurements_of(const TruthTrace& trace) {
  return {std::span<const double>(trace.current_a), std::span<const double>(trace.measured_voltage)};
}

ThetaVector perturb_theta(const ThetaVector& theta, double relative_error) {
  const Vector5 v = theta.as_vector().cwiseProduct(Vector5::Ones() + relative_error * kThetaPerturbationSigns);
  return ThetaVector::from_vector(v);
}

std::uint64_t trace_fingerprint(const TruthTrace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    h = fnv1a(h, trace.current_a[k]);
    h = fnv1a(h, trace.measured_voltage[k]);
  }
  return h;
}

RunMetrics compute_metrics(std::span<const StepRecord> records, std::span<const double> true_soc,
                           std::uint64_t trace_id) {
  if (records.size() > true_soc.size()) throw Error(ErrorKind::TraceMismatch, "more records than truth samples");
  RunMetrics m;
  m.trace_id = trace_id;
  m.steps = records.size();
  if (records.empty()) return m;

  double sum_sq = 0.0;
  long frozen = 0;
  long last_outside = -1;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double err = 100.0 * (records[k].soc_est() - true_soc[k]);
    sum_sq += err * err;
    m.max_abs_err_pct = std::max(m.max_abs_err_pct, std::abs(err));
    if (std::abs(err) >= 1.0) last_outside = static_cast<long>(k);
    if (records[k].sigma == 0) ++frozen;
  }
  m.rmse_soc_pct = std::sqrt(sum_sq / static_cast<double>(records.size()));
  m.freeze_fraction = static_cast<double>(frozen) / static_cast<double>(records.size());
  m.convergence_step =
      last_outside + 1 < static_cast<long>(records.size()) ? last_outside + 1 : -1;
  return m;
}

EstimatorRun run_estimator(const MeasurementStream& stream, double initial_soc, const ThetaVector& initial_theta,
                           Algorithm algo, const CellParameters& params, const EstimatorSetup& setup) {
  if (stream.current_a.empty() || stream.current_a.size() != stream.measured_v.size()) {
    throw Error(ErrorKind::BadSpec, "estimator needs a non-empty stream of matching current and voltage");
  }
  StateEstimate x0;
  x0.mean = ElectrochemicalState{initial_soc, 0.0, 0.0, 0.0, 0.0}.as_vector();
  x0.covariance = setup.p0_state_diag.asDiagonal();
  ThetaEstimate t0;
  t0.mean = initial_theta.as_vector();
  t0.covariance = setup.p0_theta_rel_std.cwiseProduct(t0.mean).cwiseAbs2().asDiagonal();

  SgDkfSession session =
      make_session(x0, t0, setup.noise, std::make_shared<const CellParameters>(params), setup.options);
  EstimatorRun run;
  run.records.reserve(stream.current_a.size());
  try {
    for (std::size_t k = 0; k < stream.current_a.size(); ++k) {
      auto [next, rec] = algo == Algorithm::SgDkf ? sg_dkf_step(session, stream.current_a[k], stream.measured_v[k])
                                                  : dual_ekf_step(session, stream.current_a[k], stream.measured_v[k]);
      session = std::move(next);
      run.records.push_back(rec);
    }
  } catch (const Error& e) {
    run.diverged = true;
    run.failure = e.what();
  }
  run.constants = session.constants;
  return run;
}

EstimatorRun run_estimator(const TruthTrace& trace, Algorithm algo, double init_soc_error_pct,
                           double init_theta_error, const CellParameters& params, const EstimatorSetup& setup) {
  if (trace.size() == 0) throw Error(ErrorKind::BadSpec, "empty truth trace");
  const double soc0 = std::clamp(trace.initial_state.soc * (1.0 - init_soc_error_pct / 100.0), 0.0, 1.0);
  const ThetaVector theta0 = perturb_theta(trace.truth_theta, init_theta_error);
  EstimatorRun run = run_estimator(measurements_of(trace), soc0, theta0, algo, params, setup);
  run.metrics = compute_metrics(run.records, trace.true_soc, trace_fingerprint(trace));
  return run;
}

Comparison compare(const RunMetrics& a, const RunMetrics& b) {
  if (a.trace_id != b.trace_id || a.steps != b.steps) {
    throw Error(ErrorKind::TraceMismatch, "metrics come from different traces");
  }
  Comparison c;
  c.rmse_reduction_pct = a.rmse_soc_pct > 0.0 ? 100.0 * (a.rmse_soc_pct - b.rmse_soc_pct) / a.rmse_soc_pct : 0.0;
  const long ca = a.convergence_step < 0 ? static_cast<long>(a.steps) : a.convergence_step;
  const long cb = b.convergence_step < 0 ? static_cast<long>(b.steps) : b.convergence_step;
  c.convergence_speedup_steps = ca - cb;
  return c;
}

}  // namespace sgdkf
