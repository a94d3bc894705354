#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hcdp/stability.hpp"

using namespace hcdp;

namespace {

PiecewiseLinearLaw sample_law() {
  ActuatorParams p;
  return {p.v_gate, 0.10, 0.30, 0.11, 0.33, p.u1_max};
}

}  // namespace

TEST_CASE("energy params derive from actuator and law") {
  ActuatorParams p;
  const PiecewiseLinearLaw law = sample_law();
  const EnergyParams ep = EnergyParams::from(p, law);
  const ReflectedParams r1 = reflected_params(p, Mode::One);
  const ReflectedParams r2 = reflected_params(p, Mode::Two);
  CHECK(ep.mass_1 == doctest::Approx(r1.mass));
  CHECK(ep.mass_2 == doctest::Approx(r2.mass));
  CHECK(ep.stiffness_1 == doctest::Approx(p.force_factor(Mode::One) * law.k_p1));
  CHECK(ep.stiffness_2 == doctest::Approx(p.force_factor(Mode::Two) * law.k_p2));
  CHECK(ep.dissipation_1 ==
        doctest::Approx(r1.damping + p.force_factor(Mode::One) * law.k_d1));
  CHECK(ep.dissipation_2 ==
        doctest::Approx(r2.damping + p.force_factor(Mode::Two) * law.k_d2));
  CHECK(ep.switch_speed == doctest::Approx(law.threshold));
  CHECK(ep.rho() == doctest::Approx(ep.stiffness_2 / ep.stiffness_1));
}

TEST_CASE("energy and decay rate formulas") {
  ActuatorParams p;
  const EnergyParams ep = EnergyParams::from(p, sample_law());
  const State s{0.04, -0.12};
  CHECK(energy(ep, Mode::One, s) ==
        doctest::Approx(0.5 * ep.mass_1 * s.v * s.v + 0.5 * ep.stiffness_1 * s.x * s.x));
  CHECK(energy(ep, Mode::Two, s) ==
        doctest::Approx(0.5 * ep.mass_2 * s.v * s.v + 0.5 * ep.stiffness_2 * s.x * s.x));
  CHECK(energy_rate(ep, Mode::One, s) == doctest::Approx(-ep.dissipation_1 * s.v * s.v));
  CHECK(energy_rate(ep, Mode::Two, s) < 0.0);
  CHECK(energy_rate(ep, Mode::One, {0.1, 0.0}) == 0.0);  // rest: no dissipation
}

TEST_CASE("crossing map matches direct two-sided evaluation") {
  ActuatorParams p;
  const EnergyParams ep = EnergyParams::from(p, sample_law());
  // points on the switching surface v = +-s
  for (double x : {-0.12, -0.03, 0.0, 0.05, 0.14}) {
    const State sc{x, ep.switch_speed};
    const double e1 = energy(ep, Mode::One, sc);
    const double e2 = energy(ep, Mode::Two, sc);
    CHECK(crossing_map(ep, e1) == doctest::Approx(e2).epsilon(1e-14));
  }
}

TEST_CASE("crossing map identity case: equal stiffness and mass") {
  EnergyParams ep{};
  ep.mass_1 = ep.mass_2 = 40.0;
  ep.stiffness_1 = ep.stiffness_2 = 1.0e4;  // rho = 1
  ep.dissipation_1 = ep.dissipation_2 = 100.0;
  ep.switch_speed = 0.02;
  CHECK(ep.rho() == 1.0);
  for (double e1 : {0.5 * 40.0 * 0.02 * 0.02, 1.0, 7.5, 123.0})
    CHECK(crossing_map(ep, e1) == doctest::Approx(e1).epsilon(1e-15));
}

TEST_CASE("crossing map rejects energies below the kinetic floor") {
  ActuatorParams p;
  const EnergyParams ep = EnergyParams::from(p, sample_law());
  const double floor = 0.5 * ep.mass_1 * ep.switch_speed * ep.switch_speed;
  CHECK_THROWS_AS(crossing_map(ep, 0.5 * floor), std::domain_error);
  CHECK_NOTHROW(crossing_map(ep, floor));  // exactly on the surface at x = 0
}

TEST_CASE("algebraic verdict: stabilizing law passes") {
  ActuatorParams p;
  const StabilityVerdict v = verify_algebraic(p, sample_law());
  CHECK(v.kp1_positive);
  CHECK(v.kp2_positive);
  CHECK(v.dissipation_1_positive);
  CHECK(v.dissipation_2_positive);
  CHECK(v.crossing_map_monotone);
  CHECK(v.algebraic_ok);
  CHECK(v.inertial_load_assumption);
}

TEST_CASE("algebraic verdict: negative dissipation is flagged") {
  ActuatorParams p;
  PiecewiseLinearLaw law = sample_law();
  // controller anti-damping strong enough to overcome the physical damping
  const ReflectedParams r1 = reflected_params(p, Mode::One);
  law.k_d1 = -(r1.damping / p.force_factor(Mode::One) + 0.05);
  const StabilityVerdict v = verify_algebraic(p, law);
  CHECK_FALSE(v.dissipation_1_positive);
  CHECK_FALSE(v.algebraic_ok);
  CHECK(v.dissipation_2_positive);  // the untouched mode still passes
}

TEST_CASE("algebraic verdict: non-positive stiffness is flagged") {
  ActuatorParams p;
  PiecewiseLinearLaw law = sample_law();
  law.k_p2 = -0.01;
  const StabilityVerdict v = verify_algebraic(p, law);
  CHECK_FALSE(v.kp2_positive);
  CHECK_FALSE(v.crossing_map_monotone);
  CHECK_FALSE(v.algebraic_ok);
}
