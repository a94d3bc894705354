#pragma once

// Distills the tabular quadratic-cost policy into a switched PD law: the
// state space is segmented at a speed threshold by the discrete action, and
// one linear torque plane per zone is fitted by least squares.
//
// Sign convention: gains are stored so the applied torque is
// u1 = -(k_p x + k_d v); positive gains are stabilizing. The regression
// fits the raw plane u1 = a x + b v and negates.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hcdp/dp.hpp"
#include "hcdp/model.hpp"

namespace hcdp {

struct PolicySample {
  double x;
  double v;
  double u1;
  Mode u2;
  bool saturated;
};

struct PiecewiseLinearLaw {
  double threshold;  // switching speed (m/s); mode 1 when |v| >= threshold
  double k_p1, k_d1; // gains for the high-speed, small-ratio zone
  double k_p2, k_d2; // gains for the low-speed, large-ratio zone
  double u1_max;     // torque clamp (N·m)
};

struct FitReport {
  std::size_t n_samples_1 = 0, n_samples_2 = 0;   // unsaturated, per zone
  std::size_t n_saturated_1 = 0, n_saturated_2 = 0;
  double rms_residual_1 = 0.0, rms_residual_2 = 0.0;  // N·m
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// |v| >= threshold goes to group 1, the rest to group 2.
inline std::pair<std::vector<PolicySample>, std::vector<PolicySample>>
segment_samples(const std::vector<PolicySample>& samples, double threshold) {
  if (!(threshold > 0.0))
    throw std::invalid_argument("segment_samples: threshold must be positive");
  if (samples.empty()) throw std::invalid_argument("segment_samples: no samples");
  std::pair<std::vector<PolicySample>, std::vector<PolicySample>> groups;
  for (const PolicySample& s : samples)
    (std::abs(s.v) >= threshold ? groups.first : groups.second).push_back(s);
  return groups;
}

// Least-squares plane u1 = k_p x + k_d v (no intercept) over unsaturated
// samples, solved via the 2x2 normal equations. Rank-deficient designs
// (collinear states) are rejected rather than pseudo-solved.
inline std::pair<double, double> fit_plane(const std::vector<PolicySample>& samples) {
  double sxx = 0, sxv = 0, svv = 0, sxu = 0, svu = 0;
  std::size_t n = 0;
  for (const PolicySample& s : samples) {
    if (s.saturated) continue;
    sxx += s.x * s.x;
    sxv += s.x * s.v;
    svv += s.v * s.v;
    sxu += s.x * s.u1;
    svu += s.v * s.u1;
    ++n;
  }
  if (n < 3) throw FitError("fit_plane: need at least 3 unsaturated samples");
  const double det = sxx * svv - sxv * sxv;
  if (!(det > 1e-12 * std::max(sxx, svv) * std::max(sxx, svv)) || sxx == 0.0 || svv == 0.0)
    throw FitError("fit_plane: rank-deficient sample set (collinear states)");
  return {(svv * sxu - sxv * svu) / det, (sxx * svu - sxv * sxu) / det};
}

// Eq.-style evaluation of the switched law; total on finite states.
inline ControlInput evaluate_law(const PiecewiseLinearLaw& law, const State& s) {
  double u1;
  Mode mode;
  if (std::abs(s.v) >= law.threshold) {
    u1 = -(law.k_p1 * s.x + law.k_d1 * s.v);
    mode = Mode::One;
  } else {
    u1 = -(law.k_p2 * s.x + law.k_d2 * s.v);
    mode = Mode::Two;
  }
  return {std::clamp(u1, -law.u1_max, law.u1_max), mode};
}

inline std::vector<PolicySample> samples_from_table(const PolicyTable& policy,
                                                    const GridSpec& spec,
                                                    double u1_max,
                                                    const TerminationSpec* term = nullptr) {
  std::vector<PolicySample> out;
  out.reserve(spec.cells());
  for (int i = 0; i < spec.n_x; ++i) {
    for (int j = 0; j < spec.n_v; ++j) {
      const std::size_t c = spec.idx(i, j);
      if (!policy.feasible[c]) continue;
      const State s{spec.x_at(i), spec.v_at(j)};
      if (term && term->in_target(s)) continue;  // terminal cells carry no argmin
      const double u1 = policy.u1_star[c];
      out.push_back({s.x, s.v, u1, mode_from_int(policy.u2_star[c]),
                     std::abs(u1) >= u1_max * (1.0 - 1e-9)});
    }
  }
  return out;
}

// Full distillation: table -> samples -> segmentation -> per-zone plane fit.
// Saturated samples are excluded from the regressions; the clamp in the
// resulting law covers the saturation band.
inline std::pair<PiecewiseLinearLaw, FitReport> distill(
    const PolicyTable& policy, const GridSpec& spec, double u1_max,
    double threshold, const TerminationSpec* term = nullptr) {
  const auto samples = samples_from_table(policy, spec, u1_max, term);
  auto [g1, g2] = segment_samples(samples, threshold);

  PiecewiseLinearLaw law{};
  law.threshold = threshold;
  law.u1_max = u1_max;
  const auto [a1, b1] = fit_plane(g1);
  const auto [a2, b2] = fit_plane(g2);
  law.k_p1 = -a1;
  law.k_d1 = -b1;
  law.k_p2 = -a2;
  law.k_d2 = -b2;

  FitReport rep;
  auto zone_stats = [](const std::vector<PolicySample>& g, double a, double b,
                       std::size_t& n, std::size_t& nsat, double& rms) {
    double ss = 0.0;
    for (const PolicySample& s : g) {
      if (s.saturated) {
        ++nsat;
        continue;
      }
      const double r = s.u1 - (a * s.x + b * s.v);
      ss += r * r;
      ++n;
    }
    rms = n ? std::sqrt(ss / double(n)) : 0.0;
  };
  zone_stats(g1, a1, b1, rep.n_samples_1, rep.n_saturated_1, rep.rms_residual_1);
  zone_stats(g2, a2, b2, rep.n_samples_2, rep.n_saturated_2, rep.rms_residual_2);
  return {law, rep};
}

}  // namespace hcdp
