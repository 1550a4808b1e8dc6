#include "sgdkf/battery_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgdkf/error.hpp"
#include "sgdkf/numerics.hpp"

namespace sgdkf {

namespace {

constexpr double kSurfaceClampLow = 0.001;
constexpr double kSurfaceClampHigh = 0.999;
constexpr double kSaturationLow = -0.05;
constexpr double kSaturationHigh = 1.05;

void require(bool ok, const char* field, const char* rule) {
  if (!ok) throw Error(ErrorKind::InvalidParameter, std::string(field) + " " + rule);
}

double clamp_surface(double x, const char* electrode) {
  if (!(x >= kSaturationLow && x <= kSaturationHigh)) {
    throw Error(ErrorKind::SurfaceSaturation,
                std::string(electrode) + " surface stoichiometry " + std::to_string(x) + " left [-0.05, 1.05]");
  }
  return std::clamp(x, kSurfaceClampLow, kSurfaceClampHigh);
}

}  // namespace

void validate(const CellParameters& p) {
  require(std::isfinite(p.q_all) && p.q_all > 0.0, "q_all", "must be > 0");
  require(std::isfinite(p.c_ref) && p.c_ref > 0.0, "c_ref", "must be > 0");
  require(std::isfinite(p.peukert_n) && p.peukert_n >= 1.0, "peukert_n", "must be >= 1");
  require(std::isfinite(p.d_p) && p.d_p > 0.0, "d_p", "must be > 0");
  require(std::isfinite(p.d_n) && p.d_n > 0.0, "d_n", "must be > 0");
  require(std::isfinite(p.tau_sp) && p.tau_sp > 0.0, "tau_sp", "must be > 0");
  require(std::isfinite(p.tau_sn) && p.tau_sn > 0.0, "tau_sn", "must be > 0");
  require(std::isfinite(p.g_p), "g_p", "must be finite");
  require(std::isfinite(p.g_n), "g_n", "must be finite");
  require(std::isfinite(p.tau_e) && p.tau_e > 0.0, "tau_e", "must be > 0");
  require(std::isfinite(p.p_con_a), "p_con_a", "must be finite");
  require(std::isfinite(p.p_con_b), "p_con_b", "must be finite");
  require(p.t_plus > 0.0 && p.t_plus < 1.0, "t_plus", "must lie in (0, 1)");
  require(std::isfinite(p.c0) && p.c0 > 0.0, "c0", "must be > 0");
  require(std::isfinite(p.temperature_k) && p.temperature_k > 0.0, "temperature_k", "must be > 0");
  require(std::isfinite(p.v_p) && p.v_p > 0.0, "v_p", "must be > 0");
  require(std::isfinite(p.v_n) && p.v_n > 0.0, "v_n", "must be > 0");
  require(std::isfinite(p.p_rxn_p) && p.p_rxn_p > 0.0, "p_rxn_p", "must be > 0");
  require(std::isfinite(p.p_rxn_n) && p.p_rxn_n > 0.0, "p_rxn_n", "must be > 0");
  require(std::isfinite(p.r_ohm) && p.r_ohm >= 0.0, "r_ohm", "must be >= 0");
  require(p.x_sp0 > 0.0 && p.x_sp0 < 1.0, "x_sp0", "must lie in (0, 1)");
  require(p.x_sn0 > 0.0 && p.x_sn0 < 1.0, "x_sn0", "must lie in (0, 1)");
  require(p.ocv_p.breakpoints().size() >= 4, "ocv_p", "needs at least 4 breakpoints");
  require(p.ocv_n.breakpoints().size() >= 4, "ocv_n", "needs at least 4 breakpoints");
  require(std::isfinite(p.dt) && p.dt > 0.0, "dt", "must be > 0");
  require(p.dt < std::min({p.tau_sp, p.tau_sn, p.tau_e}), "dt", "must be below every time constant");
}

void validate(const ThetaVector& t) {
  require(std::isfinite(t.d_p) && t.d_p > 0.0, "theta.d_p", "must be > 0");
  require(std::isfinite(t.d_n) && t.d_n > 0.0, "theta.d_n", "must be > 0");
  require(std::isfinite(t.q_all) && t.q_all > 0.0, "theta.q_all", "must be > 0");
  require(t.x_sp0 > 0.0 && t.x_sp0 < 1.0, "theta.x_sp0", "must lie in (0, 1)");
  require(t.x_sn0 > 0.0 && t.x_sn0 < 1.0, "theta.x_sn0", "must lie in (0, 1)");
}

ThetaVector nominal_theta(const CellParameters& p) { return {p.d_p, p.d_n, p.q_all, p.x_sp0, p.x_sn0}; }

DiffusionGains discretization_gains(const CellParameters& p) {
  DiffusionGains g;
  g.a_p = std::exp(-p.dt / p.tau_sp);
  g.b_p = p.g_p * (1.0 - g.a_p);
  g.a_n = std::exp(-p.dt / p.tau_sn);
  g.b_n = p.g_n * (1.0 - g.a_n);
  g.a_e = 1.0 - p.dt / p.tau_e;
  return g;
}

double effective_capacity(const CellParameters& p, const ThetaVector& theta, double current_a) {
  if (current_a == 0.0) return theta.q_all;
  const double c_now = std::max(std::abs(current_a) / (theta.q_all / 3600.0), 0.01 * p.c_ref);
  return theta.q_all * std::pow(p.c_ref / c_now, p.peukert_n - 1.0);
}

Stoichiometries averaged_stoichiometries(double soc, const ThetaVector& theta) {
  const double depth = 1.0 - soc;
  return {theta.x_sp0 + theta.d_p * depth, theta.x_sn0 - theta.d_n * depth};
}

Stoichiometries surface_stoichiometries(const ElectrochemicalState& s, const ThetaVector& theta) {
  const Stoichiometries avg = averaged_stoichiometries(s.soc, theta);
  return {avg.positive + s.dx_sp, avg.negative + s.dx_sn};
}

ElectrochemicalState step_state(const ElectrochemicalState& s, const ThetaVector& theta, const CellParameters& p,
                                double current_a) {
  const DiffusionGains g = discretization_gains(p);
  const double k_e = p.dt / p.tau_e;
  ElectrochemicalState next;
  next.soc = s.soc - current_a * p.dt / theta.q_all;
  next.dx_sp = g.a_p * s.dx_sp + g.b_p * current_a;
  next.dx_sn = g.a_n * s.dx_sn + g.b_n * current_a;
  next.dc1 = s.dc1 + k_e * (p.p_con_a * current_a - s.dc1);
  next.dc2 = s.dc2 + k_e * (p.p_con_b * current_a - s.dc2);
  if (!next.as_vector().allFinite()) {
    throw Error(ErrorKind::NonFiniteState, "state transition produced a non-finite entry");
  }
  return next;
}

double concentration_overpotential(const ElectrochemicalState& s, const CellParameters& p) {
  const double num = p.c0 + s.dc1;
  const double den = p.c0 - s.dc2;
  if (!(num > 0.0) || !(den > 0.0)) {
    throw Error(ErrorKind::LogDomain, "electrolyte concentration left the positive domain");
  }
  return thermal_voltage_2rt_over_f(p) * (1.0 - p.t_plus) * std::log(num / den);
}

double reaction_overpotential(const ElectrochemicalState& s, const ThetaVector& theta, const CellParameters& p,
                              double current_a) {
  const Stoichiometries surf = surface_stoichiometries(s, theta);
  const double xp = clamp_surface(surf.positive, "positive");
  const double xn = clamp_surface(surf.negative, "negative");
  const double q_eff = effective_capacity(p, theta, current_a);
  const double m_p = theta.d_p * p.p_rxn_p * current_a / (6.0 * q_eff * std::sqrt(p.v_p) * std::sqrt(1.0 - xp));
  const double m_n = theta.d_n * p.p_rxn_n * current_a / (6.0 * q_eff * std::sqrt(p.v_n) * std::sqrt(1.0 - xn));
  return thermal_voltage_2rt_over_f(p) * (std::asinh(m_p) + std::asinh(m_n));
}

double terminal_voltage(const ElectrochemicalState& s, const ThetaVector& theta, const CellParameters& p,
                        double current_a) {
  const Stoichiometries surf = surface_stoichiometries(s, theta);
  const double ocv = p.ocv_p(surf.positive) - p.ocv_n(surf.negative);
  return ocv - concentration_overpotential(s, p) - reaction_overpotential(s, theta, p, current_a) -
         p.r_ohm * current_a;
}

Matrix5 jacobian_A(const CellParameters& p) {
  const DiffusionGains g = discretization_gains(p);
  return Vector5(1.0, g.a_p, g.a_n, g.a_e, g.a_e).asDiagonal();
}

Matrix5 jacobian_A_numeric(const ElectrochemicalState& s, const ThetaVector& theta, const CellParameters& p,
                           double current_a, double rel_step) {
  auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return step_state(ElectrochemicalState::from_vector(x), theta, p, current_a).as_vector();
  };
  return numerics::numeric_jacobian(f, s.as_vector(), rel_step);
}

RowVector5 jacobian_C(const ElectrochemicalState& s, const ThetaVector& theta, const CellParameters& p,
                      double current_a, double rel_step) {
  auto h = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, terminal_voltage(ElectrochemicalState::from_vector(x), theta, p, current_a));
  };
  return numerics::numeric_jacobian(h, s.as_vector(), rel_step);
}

RowVector5 jacobian_Ctheta(const ElectrochemicalState& s, const ThetaVector& theta, const CellParameters& p,
                           double current_a, double rel_step) {
  auto h = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, terminal_voltage(s, ThetaVector::from_vector(t), p, current_a));
  };
  return numerics::numeric_jacobian(h, theta.as_vector(), rel_step);
}

}  // namespace sgdkf
