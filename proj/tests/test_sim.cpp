#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hcdp/sim.hpp"
#include "hcdp/verify.hpp"

using namespace hcdp;

TEST_CASE("constant-input simulation matches the closed-form response") {
  ActuatorParams p;
  CostWeights w;
  const ControlInput u{0.01, Mode::One};
  SimOptions opt;
  opt.dt_control = 0.02;
  opt.substeps = 10;
  const State s0{-0.05, 0.0};
  const Trajectory traj = simulate(p, w, u, s0, 2.0, opt);
  REQUIRE(traj.status == SimStatus::Completed);
  REQUIRE(traj.records.size() == 101);

  const ReflectedParams r = reflected_params(p, Mode::One);
  const double F = p.force_factor(Mode::One) * u.u1;
  const double vinf = F / r.damping;
  const double tau = r.mass / r.damping;
  for (const auto& rec : traj.records) {
    const double v_exact = vinf * (1.0 - std::exp(-rec.t / tau));
    const double x_exact =
        s0.x + vinf * rec.t - tau * vinf * (1.0 - std::exp(-rec.t / tau));
    CHECK(rec.v == doctest::Approx(v_exact).epsilon(1e-8));
    CHECK(rec.x == doctest::Approx(x_exact).epsilon(1e-8));
    CHECK(rec.u1 == u.u1);
    CHECK(rec.in_bounds);
  }
}

TEST_CASE("substep refinement converges (step-size independence)") {
  ActuatorParams p;
  CostWeights w;
  PiecewiseLinearLaw law{p.v_gate, 0.10, 0.05, 0.105, 0.058, p.u1_max};
  SimOptions a, b;
  a.substeps = 10;
  b.substeps = 20;
  const Trajectory ta = simulate(p, w, law, {-0.12, 0.0}, 10.0, a);
  const Trajectory tb = simulate(p, w, law, {-0.12, 0.0}, 10.0, b);
  REQUIRE(ta.records.size() == tb.records.size());
  const auto& fa = ta.records.back();
  const auto& fb = tb.records.back();
  const double scale = std::max({std::abs(fa.x), std::abs(fa.v), 1e-6});
  CHECK(std::abs(fa.x - fb.x) / scale < 1e-6);
  CHECK(std::abs(fa.v - fb.v) / scale < 1e-6);
}

TEST_CASE("mode gate is enforced on every record") {
  ActuatorParams p;
  CostWeights w;
  // law that would request mode 2 everywhere if its threshold were ignored
  PiecewiseLinearLaw law{p.v_gate, 0.10, 0.05, 0.105, 0.058, p.u1_max};
  const Trajectory traj = simulate(p, w, law, {-0.12, 0.0}, 20.0, {});
  for (const auto& rec : traj.records)
    if (rec.u2 == Mode::Two) CHECK(std::abs(rec.v) <= p.v_gate + 1e-12);
}

TEST_CASE("settling requires consecutive in-target steps") {
  ActuatorParams p;
  CostWeights w;
  TerminationSpec term;
  SimOptions opt;
  opt.term = &term;
  PiecewiseLinearLaw law{p.v_gate, 0.10, 0.05, 0.105, 0.058, p.u1_max};
  const Trajectory traj = simulate(p, w, law, {-0.12, 0.0}, 60.0, opt);
  CHECK(traj.status == SimStatus::Settled);
  REQUIRE(int(traj.records.size()) >= opt.settle_hold);
  for (int k = 0; k < opt.settle_hold; ++k) {
    const auto& rec = traj.records[traj.records.size() - 1 - k];
    CHECK(term.in_target({rec.x, rec.v}));
  }
  // starting inside the box settles after exactly settle_hold records
  const Trajectory at_origin = simulate(p, w, law, {0.0, 0.0}, 60.0, opt);
  CHECK(at_origin.status == SimStatus::Settled);
  CHECK(at_origin.records.size() == std::size_t(opt.settle_hold));
}

TEST_CASE("runaway input exits bounds with the exit recorded") {
  ActuatorParams p;
  CostWeights w;
  const Trajectory traj = simulate(p, w, ControlInput{p.u1_max, Mode::One},
                                   {0.10, 0.0}, 120.0, {});
  CHECK(traj.status == SimStatus::ExitedBounds);
  CHECK(traj.exit_time > 0.0);
  CHECK_FALSE(traj.records.back().in_bounds);
  CHECK(traj.records.back().x > p.x_max);
}

TEST_CASE("min-time accumulated cost equals elapsed time") {
  ActuatorParams p;
  CostWeights w;
  w.kind = CostKind::MinTime;
  const Trajectory traj =
      simulate(p, w, ControlInput{0.005, Mode::One}, {-0.05, 0.0}, 3.0, {});
  // stage rate is identically 1, so the trapezoid integral is the duration
  CHECK(accumulated_cost(traj) == doctest::Approx(traj.records.back().t).epsilon(1e-12));

  CostWeights q;  // quadratic, zero input at origin accumulates nothing
  const Trajectory still = simulate(p, q, ControlInput{0.0, Mode::Two}, {0.0, 0.0}, 1.0, {});
  CHECK(accumulated_cost(still) == 0.0);
}

TEST_CASE("energy annotation matches the stability module exactly") {
  ActuatorParams p;
  CostWeights w;
  PiecewiseLinearLaw law{p.v_gate, 0.10, 0.05, 0.105, 0.058, p.u1_max};
  const EnergyParams ep = EnergyParams::from(p, law);
  SimOptions opt;
  opt.energy = &ep;
  const Trajectory traj = simulate(p, w, law, {-0.12, 0.0}, 10.0, opt);
  for (const auto& rec : traj.records)
    CHECK(rec.energy == energy(ep, rec.u2, {rec.x, rec.v}));  // bitwise
}

TEST_CASE("simulate validates its inputs") {
  ActuatorParams p;
  CostWeights w;
  CHECK_THROWS_AS(simulate(p, w, ControlInput{}, {0.2, 0.0}, 1.0, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate(p, w, ControlInput{}, {0.0, 0.0}, -1.0, {}),
                  std::invalid_argument);
  SimOptions bad;
  bad.substeps = 0;
  CHECK_THROWS_AS(simulate(p, w, ControlInput{}, {0.0, 0.0}, 1.0, bad),
                  std::invalid_argument);
}

TEST_CASE("phase field samples both derivative fields on the requested grid") {
  ActuatorParams p;
  PiecewiseLinearLaw law{p.v_gate, 0.10, 0.05, 0.105, 0.058, p.u1_max};
  const auto field = phase_field(p, law, 7, 5);
  REQUIRE(field.size() == 35);
  for (const auto& s : field) {
    CHECK(s.vdot_natural == doctest::Approx(acceleration(p, {s.x, s.v}, {0.0, s.u2})));
    CHECK(s.vdot_closed ==
          doctest::Approx(acceleration(p, {s.x, s.v}, {s.u1, s.u2})));
    if (s.u2 == Mode::Two) CHECK(std::abs(s.v) <= p.v_gate + 1e-12);
  }
}

TEST_CASE("monotone verification accepts decay and rejects growth") {
  ActuatorParams p;
  CostWeights w;
  PiecewiseLinearLaw law{p.v_gate, 0.10, 0.05, 0.105, 0.058, p.u1_max};
  const EnergyParams ep = EnergyParams::from(p, law);
  SimOptions opt;
  opt.energy = &ep;
  const Trajectory traj = simulate(p, w, law, {-0.12, 0.0}, 30.0, opt);
  const MonotoneReport rep = verify_monotone(traj, ep, 1e-3);
  CHECK(rep.ok);
  CHECK(rep.segments_ok);
  CHECK(rep.reentry_ok);
  CHECK(rep.n_segments >= 1);

  // tampering with one record to inject energy growth must be caught
  Trajectory bad = traj;
  const std::size_t mid = bad.records.size() / 3;
  bad.records[mid].energy = bad.records[mid - 1].energy * 2.0 + 1.0;
  bad.records[mid].u2 = bad.records[mid - 1].u2;  // keep it inside a segment
  const MonotoneReport brep = verify_monotone(bad, ep, 1e-3);
  CHECK_FALSE(brep.segments_ok);

  CHECK_THROWS_AS(verify_monotone(Trajectory{}, ep, 1e-3), std::invalid_argument);
  Trajectory no_energy = simulate(p, w, law, {-0.05, 0.0}, 1.0, {});
  CHECK_THROWS_AS(verify_monotone(no_energy, ep, 1e-3), std::invalid_argument);
}
