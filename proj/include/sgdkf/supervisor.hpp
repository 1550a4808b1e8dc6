#pragma once

// Lyapunov-derived dead zone for the parameter filter and the gated dual
// filter loop built on it.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <utility>

#include "sgdkf/battery_model.hpp"
#include "sgdkf/filters.hpp"

namespace sgdkf {

struct StabilityConstants {
  Eigen::MatrixXd p_lyap;      // solves A^T P A - P = -Q for a_used
  Eigen::MatrixXd a_used;      // A after unit-circle damping
  Eigen::MatrixXd q_lyap;
  double spectral_radius_a = 0.0;  // of the Jacobian before damping
  bool damped = false;
  double epsilon = 0.0;
  double alpha = 0.0;          // lambda_min(Q) - epsilon ||A^T P A||
  double beta = 0.0;           // (1 + 1/epsilon) ||P||
  double lambda_min_q = 0.0;
  double norm_apa = 0.0;
  double norm_p = 0.0;
  double norm_i_plus_p = 0.0;
};

inline constexpr double kEpsilonFloor = 1e-6;
inline constexpr double kEpsilonCap = 1e6;

/// Solves the Lyapunov equation for the (possibly damped) Jacobian and derives
/// epsilon, alpha and beta. A Jacobian with spectral radius at or above one is
/// replaced by A (1 - kappa) / max(rho, 1).
StabilityConstants compute_stability_constants(const Eigen::MatrixXd& a_jac, const Eigen::MatrixXd& q,
                                               double kappa = 1e-3);

struct DeadZoneDecision {
  double threshold = 0.0;       // delta_k, volts
  double innovation_abs = 0.0;  // |E_k|
  int sigma = 1;                // 1: parameter update allowed, 0: frozen
  double z_bound = 0.0;         // sqrt(trace P_{k|k})
  double w_bound = 0.0;         // sqrt(trace Q)
  bool zero_gain = false;
};

/// delta = (sqrt(lambda_min(Q) / ||I + P||) z_bound + w_bound) / ||K||.
/// A vanishing gain (||K|| < 1e-15) opens the gate with an infinite threshold.
double innovation_threshold(const StabilityConstants& constants, const Matrix5& p_state, const Matrix5& q,
                            const Vector5& gain);

/// Strict inequality: |E| == delta freezes.
inline int gate(double innovation_abs, double threshold) { return innovation_abs < threshold ? 1 : 0; }

DeadZoneDecision evaluate_dead_zone(const StabilityConstants& constants, const Matrix5& p_state, const Matrix5& q,
                                    const Vector5& gain, double innovation);

struct SessionOptions {
  double kappa = 1e-3;
  int n_recompute = 100;
  FilterOptions filter;
  std::optional<Matrix5> lyapunov_q;  // defaults to the process-noise Q
  int divergence_window = 50;
  double divergence_innovation_v = 1.0;
};

struct SgDkfSession {
  StateEstimate state_est;
  ThetaEstimate theta_est;
  std::optional<StabilityConstants> constants;
  NoiseConfig noise;
  std::shared_ptr<const CellParameters> params;
  SessionOptions options;
  long step_count = 0;
  long freeze_count = 0;
  int consecutive_large_innovations = 0;
};

SgDkfSession make_session(const StateEstimate& initial_state, const ThetaEstimate& initial_theta,
                          const NoiseConfig& noise, std::shared_ptr<const CellParameters> params,
                          const SessionOptions& options = {});

struct StepRecord {
  long step = 0;
  double time_s = 0.0;
  double current_a = 0.0;
  double measured_v = 0.0;
  Vector5 state_mean = Vector5::Zero();
  Matrix5 state_covariance = Matrix5::Zero();
  double innovation = 0.0;
  double delta = 0.0;  // +inf for the ungated dual EKF
  int sigma = 1;
  double z_bound = 0.0;
  double w_bound = 0.0;
  Vector5 theta = Vector5::Zero();
  Matrix5 theta_covariance = Matrix5::Zero();

  double soc_est() const { return state_mean(0); }
};

/// Gated step: state EKF, threshold, switching signal, then the parameter EKF
/// only when sigma = 1; otherwise theta and its covariance are carried over
/// unchanged. Throws Error(DivergenceDetected) after divergence_window
/// consecutive innovations above divergence_innovation_v.
std::pair<SgDkfSession, StepRecord> sg_dkf_step(const SgDkfSession& session, double current_a, double measured_v);

/// Baseline dual EKF: the same step with sigma forced to 1.
std::pair<SgDkfSession, StepRecord> dual_ekf_step(const SgDkfSession& session, double current_a, double measured_v);

}  // namespace sgdkf
