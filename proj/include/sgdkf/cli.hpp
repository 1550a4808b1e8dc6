#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sgdkf/config.hpp"
#include "sgdkf/scenario.hpp"

namespace sgdkf::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kModelError = 3,
  kDivergence = 4,
};

inline const std::vector<std::string> kTruthHeader{"time_s", "current_a", "true_soc", "clean_v", "measured_v"};
inline const std::vector<std::string> kRecordHeader{
    "step",        "time_s",  "current_a", "measured_v", "soc_true",   "soc_est",    "soc_err_pct", "innovation_v",
    "delta_k",     "sigma",   "theta_dp",  "theta_dn",   "theta_qall", "theta_xsp0", "theta_xsn0"};
inline const std::vector<std::string> kSummaryHeader{"condition",    "init_soc_err_pct", "algorithm",
                                                     "rmse_pct",     "max_err_pct",      "convergence_step",
                                                     "freeze_fraction"};

/// Parameters accepted by `sweep --param`.
inline const std::vector<std::string> kSweepParams{"init_soc_err",  "kappa",          "r_scale",       "q_scale",
                                                   "q_theta_scale", "meas_noise_std", "theta_mismatch"};

std::string truth_csv(const TruthTrace& trace);
std::string records_csv(const std::vector<StepRecord>& records, const TruthTrace& trace);

/// Truth trace for scenario `index` of a config.
TruthTrace simulate_scenario(const RunConfig& config, std::size_t index);

/// Entry point behind the `sgdkf` executable; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgdkf::cli
