#pragma once

// Switched energy analysis of the distilled PD law: per-mode energy
// functions (physical plus virtual controller energy), their decay rates,
// the affine crossing map relating the two energies on the switching
// surface, and the algebraic global-stability conditions.
//
// The analysis assumes an inertial load with linear damping; with other
// load types the conclusions do not apply (reports carry this tag).

#include <cmath>
#include <stdexcept>

#include "hcdp/fit.hpp"
#include "hcdp/model.hpp"

namespace hcdp {

struct EnergyParams {
  // per mode: reflected mass, closed-loop stiffness (R_i/L_o) k_p_i, and
  // total dissipation b_r_i + (R_i/L_o) k_d_i
  double mass_1, stiffness_1, dissipation_1;
  double mass_2, stiffness_2, dissipation_2;
  double switch_speed;  // s, speed on the switching surface (m/s)

  double mass(Mode m) const { return m == Mode::One ? mass_1 : mass_2; }
  double stiffness(Mode m) const { return m == Mode::One ? stiffness_1 : stiffness_2; }
  double dissipation(Mode m) const { return m == Mode::One ? dissipation_1 : dissipation_2; }

  // ratio rho = (R_2 k_p2)/(R_1 k_p1) = stiffness_2 / stiffness_1
  double rho() const { return stiffness_2 / stiffness_1; }

  static EnergyParams from(const ActuatorParams& p, const PiecewiseLinearLaw& law) {
    const ReflectedParams r1 = reflected_params(p, Mode::One);
    const ReflectedParams r2 = reflected_params(p, Mode::Two);
    return {r1.mass, p.force_factor(Mode::One) * law.k_p1,
            r1.damping + p.force_factor(Mode::One) * law.k_d1,
            r2.mass, p.force_factor(Mode::Two) * law.k_p2,
            r2.damping + p.force_factor(Mode::Two) * law.k_d2,
            law.threshold};
  }
};

// E_i = 1/2 m_r_i v^2 + 1/2 (R_i/L_o) k_p_i x^2
inline double energy(const EnergyParams& ep, Mode mode, const State& s) {
  return 0.5 * ep.mass(mode) * s.v * s.v + 0.5 * ep.stiffness(mode) * s.x * s.x;
}

// In-zone energy decay rate: dE_i/dt = -(b_r_i + (R_i/L_o) k_d_i) v^2
inline double energy_rate(const EnergyParams& ep, Mode mode, const State& s) {
  return -ep.dissipation(mode) * s.v * s.v;
}

// Affine map E_2 = h(E_1) between the mode energies at the same switching
// surface point: h(E1) = 1/2 (m_r2 - rho m_r1) s^2 + rho E1. This is the
// form obtained by eliminating x^2 between the two surface energies; it is
// strictly increasing in E1 whenever rho > 0.
inline double crossing_map(const EnergyParams& ep, double e1) {
  const double s2 = ep.switch_speed * ep.switch_speed;
  if (e1 < 0.5 * ep.mass_1 * s2 * (1.0 - 1e-12))
    throw std::domain_error("crossing_map: E1 below the kinetic floor at the switch speed");
  const double rho = ep.rho();
  return 0.5 * (ep.mass_2 - rho * ep.mass_1) * s2 + rho * e1;
}

struct StabilityVerdict {
  bool kp1_positive = false;
  bool kp2_positive = false;
  bool dissipation_1_positive = false;
  bool dissipation_2_positive = false;
  bool crossing_map_monotone = false;  // rho > 0
  bool algebraic_ok = false;
  EnergyParams witness{};  // the derived closed-loop coefficients
  // valid only for inertial loads with linear damping
  bool inertial_load_assumption = true;
};

// Checks the algebraic conditions under which both mode energies are
// positive definite with negative rates, and the crossing map is monotone;
// together these give global convergence to the origin.
inline StabilityVerdict verify_algebraic(const ActuatorParams& params,
                                         const PiecewiseLinearLaw& law) {
  StabilityVerdict v;
  v.witness = EnergyParams::from(params, law);
  v.kp1_positive = law.k_p1 > 0.0;
  v.kp2_positive = law.k_p2 > 0.0;
  v.dissipation_1_positive = v.witness.dissipation_1 > 0.0;
  v.dissipation_2_positive = v.witness.dissipation_2 > 0.0;
  v.crossing_map_monotone = v.kp1_positive && v.kp2_positive && v.witness.rho() > 0.0;
  v.algebraic_ok = v.kp1_positive && v.kp2_positive && v.dissipation_1_positive &&
                   v.dissipation_2_positive && v.crossing_map_monotone;
  return v;
}

}  // namespace hcdp
