#pragma once

// Extended Kalman filter machinery for a scalar measurement, instantiated as
// the state EKF over x_k and the random-walk parameter EKF over theta_k.

#include <Eigen/Dense>

#include <cmath>

#include "sgdkf/battery_model.hpp"
#include "sgdkf/error.hpp"

namespace sgdkf {

template <int N>
struct GaussianEstimate {
  Eigen::Matrix<double, N, 1> mean;
  Eigen::Matrix<double, N, N> covariance;

  friend bool operator==(const GaussianEstimate& a, const GaussianEstimate& b) {
    return a.mean == b.mean && a.covariance == b.covariance;
  }
};

using StateEstimate = GaussianEstimate<5>;
using ThetaEstimate = GaussianEstimate<5>;

enum class CovarianceForm { Joseph, Short };

struct NoiseConfig {
  Matrix5 q_state = Matrix5::Zero();
  double r_meas = 0.0;  // volts^2
  Matrix5 q_theta = Matrix5::Zero();

  friend bool operator==(const NoiseConfig& a, const NoiseConfig& b) {
    return a.q_state == b.q_state && a.r_meas == b.r_meas && a.q_theta == b.q_theta;
  }
};

struct FilterOptions {
  CovarianceForm covariance_form = CovarianceForm::Joseph;
  bool numeric_state_jacobian = false;
};

/// (I - KC) P (I - KC)^T + K R K^T, symmetrized.
template <typename DerivedP, typename DerivedK, typename DerivedC>
typename DerivedP::PlainObject joseph_update(const Eigen::MatrixBase<DerivedP>& p_prior,
                                             const Eigen::MatrixBase<DerivedK>& gain,
                                             const Eigen::MatrixBase<DerivedC>& c, double r) {
  using Plain = typename DerivedP::PlainObject;
  const Plain i_kc = Plain::Identity(p_prior.rows(), p_prior.cols()) - gain * c;
  Plain p = i_kc * p_prior * i_kc.transpose() + gain * r * gain.transpose();
  return (p + p.transpose()) / 2.0;
}

template <typename DerivedP, typename DerivedK, typename DerivedC>
typename DerivedP::PlainObject short_form_update(const Eigen::MatrixBase<DerivedP>& p_prior,
                                                 const Eigen::MatrixBase<DerivedK>& gain,
                                                 const Eigen::MatrixBase<DerivedC>& c) {
  using Plain = typename DerivedP::PlainObject;
  Plain p = (Plain::Identity(p_prior.rows(), p_prior.cols()) - gain * c) * p_prior;
  return (p + p.transpose()) / 2.0;
}

template <int N>
GaussianEstimate<N> ekf_predict(const GaussianEstimate<N>& posterior, const Eigen::Matrix<double, N, 1>& predicted_mean,
                                const Eigen::Matrix<double, N, N>& a, const Eigen::Matrix<double, N, N>& q) {
  GaussianEstimate<N> prior{predicted_mean, a * posterior.covariance * a.transpose() + q};
  prior.covariance = (prior.covariance + prior.covariance.transpose()) / 2.0;
  return prior;
}

template <int N>
struct ScalarUpdate {
  GaussianEstimate<N> posterior;
  Eigen::Matrix<double, N, 1> gain;
  double innovation = 0.0;
  double innovation_variance = 0.0;
};

/// Measurement update for one scalar output y = c x + noise(r) given the
/// already-formed innovation.
template <int N>
ScalarUpdate<N> scalar_measurement_update(const GaussianEstimate<N>& prior, const Eigen::Matrix<double, 1, N>& c,
                                          double innovation, double r, CovarianceForm form) {
  const double s = (c * prior.covariance * c.transpose())(0, 0) + r;
  if (!std::isfinite(s) || !(s > 0.0)) {
    throw Error(ErrorKind::SingularInnovationCovariance, "innovation variance is not positive");
  }
  ScalarUpdate<N> out;
  out.gain = prior.covariance * c.transpose() / s;
  out.innovation = innovation;
  out.innovation_variance = s;
  out.posterior.mean = prior.mean + out.gain * innovation;
  out.posterior.covariance = form == CovarianceForm::Joseph ? joseph_update(prior.covariance, out.gain, c, r)
                                                            : short_form_update(prior.covariance, out.gain, c);
  return out;
}

struct StateStepResult {
  StateEstimate posterior;
  double innovation = 0.0;  // E_k, volts
  Vector5 gain = Vector5::Zero();
  StateEstimate prior;
  Matrix5 jacobian_a = Matrix5::Zero();
  RowVector5 jacobian_c = RowVector5::Zero();
};

/// One predict/update cycle of the state EKF. The current sample is held over
/// the interval ending at the measurement, so it drives both the prediction
/// and the output map.
StateStepResult state_ekf_step(const StateEstimate& prior, const ThetaVector& theta, const CellParameters& params,
                               double current_a, double measured_v, const NoiseConfig& noise,
                               const FilterOptions& options = {});

struct ParamStepResult {
  ThetaEstimate posterior;
  double residual = 0.0;  // r_k, volts
  Vector5 gain = Vector5::Zero();
};

/// Random-walk parameter EKF step using the state posterior mean. The updated
/// theta is clamped into its physical ranges; Error(ThetaOutOfRange) when the
/// clamp would move an entry by more than half its prior value.
ParamStepResult param_ekf_step(const ThetaEstimate& prior_theta, const Vector5& state_posterior_mean,
                               const CellParameters& params, double current_a, double measured_v,
                               const NoiseConfig& noise, const FilterOptions& options = {});

}  // namespace sgdkf
