#pragma once

// JSON run configuration: cell parameters, noise and filter settings, truth
// generation, and the scenario list.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgdkf/battery_model.hpp"
#include "sgdkf/scenario.hpp"

namespace sgdkf {

inline constexpr int kConfigVersion = 1;

struct NoiseSpec {
  Vector5 q_state_diag = Vector5::Zero();
  double r_meas = 0.0;
  Vector5 q_theta_diag = Vector5::Zero();

  NoiseConfig to_noise_config() const;
  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct TruthSpec {
  double noise_std_v = 0.005;
  double theta_mismatch = 0.05;
  std::optional<Vector5> process_noise_std;

  friend bool operator==(const TruthSpec&, const TruthSpec&) = default;
};

struct FilterSpec {
  Vector5 p0_state_diag = Vector5::Zero();
  Vector5 p0_theta_rel_std = Vector5::Zero();
  double kappa = 1e-3;
  int n_recompute = 100;
  bool joseph_form = true;
  std::optional<Vector5> lyapunov_q_diag;

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

struct ScenarioSpec {
  std::string name;
  CurrentProfile profile;
  std::string profile_file;  // from_file only, as written in the config
  double initial_soc = 1.0;
  std::vector<double> init_soc_errors_pct;
  std::vector<Algorithm> algorithms;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 1;
  CellParameters cell;
  NoiseSpec noise;
  TruthSpec truth;
  FilterSpec filter;
  std::vector<ScenarioSpec> scenarios;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates. Relative profile paths resolve against base_dir.
/// Throws Error(ConfigInvalid) whose message names the offending field, or the
/// line and column for malformed JSON.
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

std::string serialize_config(const RunConfig& config);

/// Default process/parameter noise for a cell when the config omits them.
NoiseSpec default_noise(const CellParameters& cell);

EstimatorSetup make_estimator_setup(const RunConfig& config);

/// Seed for the truth trace of scenario `index`.
std::uint64_t scenario_seed(const RunConfig& config, std::size_t index);

}  // namespace sgdkf
