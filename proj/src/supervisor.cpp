#include "sgdkf/supervisor.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "sgdkf/numerics.hpp"

namespace sgdkf {

StabilityConstants compute_stability_constants(const Eigen::MatrixXd& a_jac, const Eigen::MatrixXd& q,
                                               double kappa) {
  if (!(kappa >= 0.0 && kappa <= 0.1)) {
    throw Error(ErrorKind::BadSpec, "kappa must lie in [0, 0.1]");
  }
  if (!numerics::is_symmetric_positive_definite(q)) {
    throw Error(ErrorKind::NotSPD, "Lyapunov Q must be symmetric positive-definite");
  }

  StabilityConstants c;
  c.q_lyap = q;
  c.spectral_radius_a = numerics::spectral_radius(a_jac);
  c.a_used = a_jac;
  if (c.spectral_radius_a >= 1.0 - 1e-9) {
    c.a_used = a_jac * (1.0 - kappa) / std::max(c.spectral_radius_a, 1.0);
    c.damped = true;
  }

  c.p_lyap = numerics::solve_discrete_lyapunov(c.a_used, q);
  const Eigen::MatrixXd apa = c.a_used.transpose() * c.p_lyap * c.a_used;
  c.norm_apa = numerics::two_norm(apa);
  c.norm_p = numerics::two_norm(c.p_lyap);
  c.lambda_min_q = numerics::lambda_min_symmetric(q);
  c.norm_i_plus_p = numerics::two_norm(Eigen::MatrixXd::Identity(q.rows(), q.cols()) + c.p_lyap);

  if (c.norm_apa == 0.0) {
    // P is positive-definite, so A^T P A vanishes only for A = 0.
    if (c.a_used.cwiseAbs().maxCoeff() != 0.0) {
      throw Error(ErrorKind::DegenerateA, "A^T P A vanished for a non-zero A");
    }
    c.epsilon = kEpsilonFloor;
  } else {
    c.epsilon = std::min(c.lambda_min_q / (2.0 * c.norm_apa), kEpsilonCap);
  }
  c.alpha = c.lambda_min_q - c.epsilon * c.norm_apa;
  c.beta = (1.0 + 1.0 / c.epsilon) * c.norm_p;
  if (!(c.alpha > 0.0) || !(c.beta > 0.0)) {
    throw Error(ErrorKind::DegenerateA, "stability constants lost positivity");
  }
  return c;
}

double innovation_threshold(const StabilityConstants& constants, const Matrix5& p_state, const Matrix5& q,
                            const Vector5& gain) {
  const double gain_norm = gain.norm();
  if (gain_norm < 1e-15) return std::numeric_limits<double>::infinity();
  const double z_bound = std::sqrt(std::max(p_state.trace(), 0.0));
  const double w_bound = std::sqrt(std::max(q.trace(), 0.0));
  return (std::sqrt(constants.lambda_min_q / constants.norm_i_plus_p) * z_bound + w_bound) / gain_norm;
}

DeadZoneDecision evaluate_dead_zone(const StabilityConstants& constants, const Matrix5& p_state, const Matrix5& q,
                                    const Vector5& gain, double innovation) {
  DeadZoneDecision d;
  d.z_bound = std::sqrt(std::max(p_state.trace(), 0.0));
  d.w_bound = std::sqrt(std::max(q.trace(), 0.0));
  d.zero_gain = gain.norm() < 1e-15;
  d.threshold = innovation_threshold(constants, p_state, q, gain);
  d.innovation_abs = std::abs(innovation);
  d.sigma = gate(d.innovation_abs, d.threshold);
  return d;
}

SgDkfSession make_session(const StateEstimate& initial_state, const ThetaEstimate& initial_theta,
                          const NoiseConfig& noise, std::shared_ptr<const CellParameters> params,
                          const SessionOptions& options) {
  if (!params) throw Error(ErrorKind::BadSpec, "session needs cell parameters");
  if (options.n_recompute < 1) throw Error(ErrorKind::BadSpec, "n_recompute must be >= 1");
  SgDkfSession s;
  s.state_est = initial_state;
  s.theta_est = initial_theta;
  s.noise = noise;
  s.params = std::move(params);
  s.options = options;
  return s;
}

namespace {

std::pair<SgDkfSession, StepRecord> advance(const SgDkfSession& session, double current_a, double measured_v,
                                            bool gated) {
  const CellParameters& params = *session.params;
  SgDkfSession next = session;

  const ThetaVector theta = ThetaVector::from_vector(session.theta_est.mean);
  const StateStepResult st =
      state_ekf_step(session.state_est, theta, params, current_a, measured_v, session.noise, session.options.filter);
  next.state_est = st.posterior;

  StepRecord rec;
  rec.step = session.step_count;
  rec.time_s = static_cast<double>(session.step_count + 1) * params.dt;
  rec.current_a = current_a;
  rec.measured_v = measured_v;
  rec.innovation = st.innovation;
  rec.state_mean = st.posterior.mean;
  rec.state_covariance = st.posterior.covariance;

  int sigma = 1;
  rec.delta = std::numeric_limits<double>::infinity();
  if (gated) {
    if (!next.constants || session.step_count % session.options.n_recompute == 0) {
      const Matrix5 q_lyap = session.options.lyapunov_q.value_or(session.noise.q_state);
      next.constants = compute_stability_constants(st.jacobian_a, q_lyap, session.options.kappa);
    }
    const DeadZoneDecision d =
        evaluate_dead_zone(*next.constants, st.posterior.covariance, session.noise.q_state, st.gain, st.innovation);
    if (d.zero_gain && session.step_count == 0) {
      std::clog << "sgdkf: state gain vanished; dead zone left open\n";
    }
    sigma = d.sigma;
    rec.delta = d.threshold;
    rec.z_bound = d.z_bound;
    rec.w_bound = d.w_bound;
  }
  rec.sigma = sigma;

  if (sigma == 1) {
    const ParamStepResult pr = param_ekf_step(session.theta_est, st.posterior.mean, params, current_a, measured_v,
                                              session.noise, session.options.filter);
    next.theta_est = pr.posterior;
  } else {
    ++next.freeze_count;
  }
  rec.theta = next.theta_est.mean;
  rec.theta_covariance = next.theta_est.covariance;

  ++next.step_count;
  if (std::abs(st.innovation) > session.options.divergence_innovation_v) {
    if (++next.consecutive_large_innovations >= session.options.divergence_window) {
      throw Error(ErrorKind::DivergenceDetected, "innovation exceeded " +
                                                     std::to_string(session.options.divergence_innovation_v) +
                                                     " V for " + std::to_string(session.options.divergence_window) +
                                                     " consecutive steps");
    }
  } else {
    next.consecutive_large_innovations = 0;
  }
  return {std::move(next), rec};
}

}  // namespace

std::pair<SgDkfSession, StepRecord> sg_dkf_step(const SgDkfSession& session, double current_a, double measured_v) {
  return advance(session, current_a, measured_v, true);
}

std::pair<SgDkfSession, StepRecord> dual_ekf_step(const SgDkfSession& session, double current_a, double measured_v) {
  return advance(session, current_a, measured_v, false);
}

}  // namespace sgdkf
