#pragma once

// Discrete-time reduced-order electrochemical cell model (single particle
// with electrolyte): coulomb-counted SOC, first-order solid-diffusion lags,
// two electrolyte concentration deviations, and a terminal-voltage map built
// from OCV, concentration and Butler-Volmer overpotentials and ohmic drop.
//
// Units: current in amperes (positive = discharge), charge in coulombs,
// time in seconds.

#include <Eigen/Dense>

#include "sgdkf/ocv_curve.hpp"

namespace sgdkf {

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;
using RowVector5 = Eigen::Matrix<double, 1, 5>;

inline constexpr double kGasConstant = 8.314;  // J / (mol K)
inline constexpr double kFaraday = 96485.0;    // C / mol

struct CellParameters {
  double q_all = 0.0;          // rated capacity, C
  double c_ref = 0.0;          // reference C-rate, 1/h
  double peukert_n = 0.0;
  double d_p = 0.0;            // stoichiometry span of the positive electrode over SOC 1 -> 0
  double d_n = 0.0;
  double tau_sp = 0.0;         // solid-diffusion time constants, s
  double tau_sn = 0.0;
  double g_p = 0.0;            // diffusion static gains, stoichiometry / A
  double g_n = 0.0;
  double tau_e = 0.0;          // electrolyte diffusion time constant, s
  double p_con_a = 0.0;        // mol m^-3 / A
  double p_con_b = 0.0;
  double t_plus = 0.0;
  double c0 = 0.0;             // mol m^-3
  double temperature_k = 0.0;
  double v_p = 0.0;
  double v_n = 0.0;
  double p_rxn_p = 0.0;
  double p_rxn_n = 0.0;
  double r_ohm = 0.0;          // ohm
  double x_sp0 = 0.0;          // stoichiometries at SOC = 1
  double x_sn0 = 0.0;
  OcvCurve ocv_p;
  OcvCurve ocv_n;
  double dt = 0.0;             // sampling period, s

  friend bool operator==(const CellParameters&, const CellParameters&) = default;
};

/// Throws Error(InvalidParameter) naming the first offending field.
void validate(const CellParameters& params);

/// x_k = [SOC, dx_sp, dx_sn, dc1, dc2].
struct ElectrochemicalState {
  double soc = 0.0;
  double dx_sp = 0.0;
  double dx_sn = 0.0;
  double dc1 = 0.0;
  double dc2 = 0.0;

  Vector5 as_vector() const { return (Vector5() << soc, dx_sp, dx_sn, dc1, dc2).finished(); }
  static ElectrochemicalState from_vector(const Vector5& v) { return {v(0), v(1), v(2), v(3), v(4)}; }

  friend bool operator==(const ElectrochemicalState&, const ElectrochemicalState&) = default;
};

/// theta_k = [D_p, D_n, Q_all, x_sp0, x_sn0].
struct ThetaVector {
  double d_p = 0.0;
  double d_n = 0.0;
  double q_all = 0.0;
  double x_sp0 = 0.0;
  double x_sn0 = 0.0;

  Vector5 as_vector() const { return (Vector5() << d_p, d_n, q_all, x_sp0, x_sn0).finished(); }
  static ThetaVector from_vector(const Vector5& v) { return {v(0), v(1), v(2), v(3), v(4)}; }

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;
};

void validate(const ThetaVector& theta);

/// The theta entries carried in a parameter set.
ThetaVector nominal_theta(const CellParameters& params);

struct Stoichiometries {
  double positive = 0.0;
  double negative = 0.0;
};

struct DiffusionGains {
  double a_p = 0.0;
  double b_p = 0.0;
  double a_n = 0.0;
  double b_n = 0.0;
  double a_e = 0.0;  // 1 - dt / tau_e
};

/// Zero-order-hold poles a = exp(-dt/tau) with static gains b = g (1 - a).
DiffusionGains discretization_gains(const CellParameters& params);

inline double thermal_voltage_2rt_over_f(const CellParameters& params) {
  return 2.0 * kGasConstant * params.temperature_k / kFaraday;
}

/// Peukert capacity Q_all (C_ref / C_now)^(n-1); C_now = |I| / (Q_all / 3600)
/// clamped below at 0.01 C_ref. Zero current returns Q_all.
double effective_capacity(const CellParameters& params, const ThetaVector& theta, double current_a);

/// Closed form of the charge-balance recursions anchored at SOC = 1.
Stoichiometries averaged_stoichiometries(double soc, const ThetaVector& theta);

/// Averaged stoichiometry plus the diffusion deviation, before clamping.
Stoichiometries surface_stoichiometries(const ElectrochemicalState& state, const ThetaVector& theta);

ElectrochemicalState step_state(const ElectrochemicalState& state, const ThetaVector& theta,
                                const CellParameters& params, double current_a);

double concentration_overpotential(const ElectrochemicalState& state, const CellParameters& params);

/// asinh(m) = ln(sqrt(m^2 + 1) + m) form of inverted Butler-Volmer kinetics.
double reaction_overpotential(const ElectrochemicalState& state, const ThetaVector& theta,
                              const CellParameters& params, double current_a);

double terminal_voltage(const ElectrochemicalState& state, const ThetaVector& theta,
                        const CellParameters& params, double current_a);

/// d f / d x. The dynamics are linear in x, so this is the constant diagonal
/// diag(1, a_p, a_n, 1 - dt/tau_e, 1 - dt/tau_e).
Matrix5 jacobian_A(const CellParameters& params);
Matrix5 jacobian_A_numeric(const ElectrochemicalState& state, const ThetaVector& theta,
                           const CellParameters& params, double current_a, double rel_step = 1e-6);

/// d h / d x by central differences.
RowVector5 jacobian_C(const ElectrochemicalState& state, const ThetaVector& theta,
                      const CellParameters& params, double current_a, double rel_step = 1e-6);

/// d h / d theta by central differences.
RowVector5 jacobian_Ctheta(const ElectrochemicalState& state, const ThetaVector& theta,
                           const CellParameters& params, double current_a, double rel_step = 1e-6);

}  // namespace sgdkf
