#include "sgdkf/filters.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace sgdkf {

namespace {

struct Range {
  double lo;
  double hi;
};

// d_p, d_n, q_all, x_sp0, x_sn0
constexpr std::array<Range, 5> kThetaRanges{{
    {1e-3, 1e3},
    {1e-3, 1e3},
    {1.0, 1e9},
    {1e-3, 1.0 - 1e-3},
    {1e-3, 1.0 - 1e-3},
}};
constexpr std::array<const char*, 5> kThetaNames{"d_p", "d_n", "q_all", "x_sp0", "x_sn0"};

}  // namespace

StateStepResult state_ekf_step(const StateEstimate& prior, const ThetaVector& theta, const CellParameters& params,
                               double current_a, double measured_v, const NoiseConfig& noise,
                               const FilterOptions& options) {
  const ElectrochemicalState previous = ElectrochemicalState::from_vector(prior.mean);

  StateStepResult out;
  out.jacobian_a = options.numeric_state_jacobian ? jacobian_A_numeric(previous, theta, params, current_a)
                                                  : jacobian_A(params);
  const ElectrochemicalState predicted = step_state(previous, theta, params, current_a);
  out.prior = ekf_predict<5>(prior, predicted.as_vector(), out.jacobian_a, noise.q_state);

  out.jacobian_c = jacobian_C(predicted, theta, params, current_a);
  const double innovation = measured_v - terminal_voltage(predicted, theta, params, current_a);
  const auto update =
      scalar_measurement_update<5>(out.prior, out.jacobian_c, innovation, noise.r_meas, options.covariance_form);

  out.posterior = update.posterior;
  out.innovation = innovation;
  out.gain = update.gain;
  if (!out.posterior.mean.allFinite() || !out.posterior.covariance.allFinite()) {
    throw Error(ErrorKind::NonFiniteState, "state EKF produced a non-finite estimate");
  }
  return out;
}

ParamStepResult param_ekf_step(const ThetaEstimate& prior_theta, const Vector5& state_posterior_mean,
                               const CellParameters& params, double current_a, double measured_v,
                               const NoiseConfig& noise, const FilterOptions& options) {
  ThetaEstimate predicted{prior_theta.mean, prior_theta.covariance + noise.q_theta};
  const ThetaVector theta = ThetaVector::from_vector(predicted.mean);
  const ElectrochemicalState state = ElectrochemicalState::from_vector(state_posterior_mean);

  const RowVector5 c_theta = jacobian_Ctheta(state, theta, params, current_a);
  const double residual = measured_v - terminal_voltage(state, theta, params, current_a);
  auto update = scalar_measurement_update<5>(predicted, c_theta, residual, noise.r_meas, options.covariance_form);

  for (int i = 0; i < 5; ++i) {
    const double raw = update.posterior.mean(i);
    const double clamped = std::clamp(raw, kThetaRanges[i].lo, kThetaRanges[i].hi);
    if (!std::isfinite(raw) || std::abs(clamped - raw) > 0.5 * std::abs(prior_theta.mean(i))) {
      throw Error(ErrorKind::ThetaOutOfRange,
                  std::string("parameter ") + kThetaNames[i] + " diverged to " + std::to_string(raw));
    }
    update.posterior.mean(i) = clamped;
  }
  return {update.posterior, residual, update.gain};
}

}  // namespace sgdkf
