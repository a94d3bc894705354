#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hcdp/fit.hpp"

using namespace hcdp;

namespace {

// Build a policy table holding exact samples of a switched PD law.
PolicyTable table_from_law(const GridSpec& g, const PiecewiseLinearLaw& law) {
  PolicyTable t;
  t.grid = g;
  t.u1_star.resize(g.cells());
  t.u2_star.resize(g.cells());
  t.feasible.assign(g.cells(), 1);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      const ControlInput u = evaluate_law(law, {g.x_at(i), g.v_at(j)});
      t.u1_star[g.idx(i, j)] = u.u1;
      t.u2_star[g.idx(i, j)] = std::uint8_t(mode_index(u.u2));
    }
  return t;
}

}  // namespace

TEST_CASE("segmentation splits on the speed threshold") {
  std::vector<PolicySample> s = {{0.1, 0.05, 0, Mode::One, false},
                                 {0.1, 0.02, 0, Mode::One, false},
                                 {0.1, 0.0199, 0, Mode::Two, false},
                                 {0.1, -0.5, 0, Mode::One, false},
                                 {0.1, -0.01, 0, Mode::Two, false}};
  auto [g1, g2] = segment_samples(s, 0.02);
  CHECK(g1.size() == 3);  // |v| >= threshold, boundary included
  CHECK(g2.size() == 2);
  CHECK_THROWS_AS(segment_samples(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(segment_samples({}, 0.02), std::invalid_argument);
}

TEST_CASE("plane fit recovers exact planes and matches the normal equations") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ux(-0.15, 0.15), uv(-0.5, 0.5);
  std::normal_distribution<double> noise(0.0, 1e-4);

  std::vector<PolicySample> clean, noisy;
  const double a = -0.09, b = -0.05;  // u1 = a x + b v
  for (int k = 0; k < 400; ++k) {
    const double x = ux(rng), v = uv(rng);
    clean.push_back({x, v, a * x + b * v, Mode::One, false});
    noisy.push_back({x, v, a * x + b * v + noise(rng), Mode::One, false});
  }

  const auto [ca, cb] = fit_plane(clean);
  CHECK(ca == doctest::Approx(a).epsilon(1e-10));
  CHECK(cb == doctest::Approx(b).epsilon(1e-10));

  // reference solve of the same normal equations, accumulated independently
  double sxx = 0, sxv = 0, svv = 0, sxu = 0, svu = 0;
  for (const auto& s : noisy) {
    sxx += s.x * s.x;
    sxv += s.x * s.v;
    svv += s.v * s.v;
    sxu += s.x * s.u1;
    svu += s.v * s.u1;
  }
  const double det = sxx * svv - sxv * sxv;
  const auto [na, nb] = fit_plane(noisy);
  CHECK(na == doctest::Approx((svv * sxu - sxv * svu) / det).epsilon(1e-12));
  CHECK(nb == doctest::Approx((sxx * svu - sxv * sxu) / det).epsilon(1e-12));
}

TEST_CASE("saturated samples are excluded from the regression") {
  std::vector<PolicySample> s;
  const double a = -0.1, b = -0.04;
  for (double x : {-0.1, -0.05, 0.02, 0.07, 0.12})
    for (double v : {-0.3, -0.1, 0.05, 0.25})
      s.push_back({x, v, a * x + b * v, Mode::One, false});
  // corrupted but flagged saturated: must not affect the fit
  s.push_back({0.1, 0.1, 0.02, Mode::One, true});
  s.push_back({-0.1, -0.1, -0.02, Mode::One, true});
  const auto [fa, fb] = fit_plane(s);
  CHECK(fa == doctest::Approx(a).epsilon(1e-10));
  CHECK(fb == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("rank-deficient sample sets are rejected") {
  std::vector<PolicySample> collinear;
  for (int k = 0; k < 10; ++k) {
    const double x = 0.01 * k;
    collinear.push_back({x, 2.0 * x, 0.5 * x, Mode::One, false});  // v = 2x exactly
  }
  CHECK_THROWS_AS(fit_plane(collinear), FitError);
  CHECK_THROWS_AS(fit_plane({{0.1, 0.2, 0.0, Mode::One, false}}), FitError);
}

TEST_CASE("evaluate_law switches zone, negates gains and clamps") {
  PiecewiseLinearLaw law{0.02, 0.1, 0.05, 0.3, 0.08, 0.02};
  const ControlInput hi = evaluate_law(law, {0.05, 0.1});
  CHECK(hi.u2 == Mode::One);
  CHECK(hi.u1 == doctest::Approx(-(0.1 * 0.05 + 0.05 * 0.1)));
  const ControlInput lo = evaluate_law(law, {0.01, -0.01});
  CHECK(lo.u2 == Mode::Two);
  CHECK(lo.u1 == doctest::Approx(-(0.3 * 0.01 + 0.08 * -0.01)));
  const ControlInput clamped = evaluate_law(law, {0.15, 0.5});
  CHECK(clamped.u1 == -0.02);
  // odd symmetry
  const ControlInput mirrored = evaluate_law(law, {-0.01, 0.01});
  CHECK(mirrored.u1 == doctest::Approx(-lo.u1));
}

TEST_CASE("distillation round-trips a synthetic law exactly") {
  ActuatorParams p;
  GridSpec g = GridSpec::from_params(p, 61, 61, 11, 0.02);
  PiecewiseLinearLaw truth{0.02, 0.11, 0.06, 0.13, 0.075, p.u1_max};
  const PolicyTable t = table_from_law(g, truth);

  const auto [law, rep] = distill(t, g, p.u1_max, truth.threshold);
  CHECK(law.k_p1 == doctest::Approx(truth.k_p1).epsilon(1e-9));
  CHECK(law.k_d1 == doctest::Approx(truth.k_d1).epsilon(1e-9));
  CHECK(law.k_p2 == doctest::Approx(truth.k_p2).epsilon(1e-9));
  CHECK(law.k_d2 == doctest::Approx(truth.k_d2).epsilon(1e-9));
  CHECK(rep.rms_residual_1 < 1e-12);
  CHECK(rep.rms_residual_2 < 1e-12);
  CHECK(rep.n_samples_1 > 0);
  CHECK(rep.n_samples_2 > 0);
}

TEST_CASE("samples_from_table skips infeasible and terminal cells") {
  ActuatorParams p;
  GridSpec g = GridSpec::from_params(p, 21, 21, 5, 0.02);
  PiecewiseLinearLaw truth{0.02, 0.1, 0.05, 0.1, 0.05, p.u1_max};
  PolicyTable t = table_from_law(g, truth);
  t.feasible[g.idx(0, 0)] = 0;
  TerminationSpec term;
  term.target_half_width_x = 2.0 * g.hx();
  term.target_half_width_v = 2.0 * g.hv();

  const auto all = samples_from_table(t, g, p.u1_max);
  const auto pruned = samples_from_table(t, g, p.u1_max, &term);
  CHECK(all.size() == g.cells() - 1);
  std::size_t terminal = 0;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j)
      if (term.in_target({g.x_at(i), g.v_at(j)})) ++terminal;
  CHECK(pruned.size() == all.size() - terminal);
}
