#pragma once

// Empirical monotonicity verification of the switched energies along
// simulated trajectories: within each same-mode segment the active energy
// must be non-increasing (up to integration tolerance), and the energies
// sampled at successive entries into each zone must be strictly decreasing.
// Upward jumps at individual crossings are expected (down-shifts raise the
// kinetic term) and are reported, not failed.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hcdp/sim.hpp"
#include "hcdp/stability.hpp"

namespace hcdp {

struct MonotoneReport {
  bool segments_ok = false;      // per-segment non-increase within tolerance
  bool reentry_ok = false;       // zone-reentry sequences strictly decreasing
  bool ok = false;
  int n_segments = 0;
  double max_segment_violation = 0.0;  // relative to the segment energy scale
  std::vector<double> entries_mode_1;  // E_1 at successive entries into zone 1
  std::vector<double> entries_mode_2;
  int n_upward_jumps = 0;
  double max_upward_jump = 0.0;  // J
  bool inertial_load_assumption = true;
};

inline MonotoneReport verify_monotone(const Trajectory& traj,
                                      const EnergyParams& ep,
                                      double rel_tol = 1e-3) {
  if (traj.records.empty())
    throw std::invalid_argument("verify_monotone: empty trajectory");
  for (const auto& r : traj.records)
    if (std::isnan(r.energy))
      throw std::invalid_argument("verify_monotone: trajectory lacks energy/mode annotations");

  MonotoneReport rep;

  // split into maximal same-mode segments
  std::size_t seg_begin = 0;
  double worst = 0.0;
  const auto& rec = traj.records;
  auto close_segment = [&](std::size_t lo, std::size_t hi) {  // [lo, hi]
    ++rep.n_segments;
    double scale = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) scale = std::max(scale, rec[k].energy);
    if (scale <= 0.0) return;
    for (std::size_t k = lo; k + 1 <= hi; ++k) {
      const double rise = (rec[k + 1].energy - rec[k].energy) / scale;
      if (rise > worst) worst = rise;
    }
    auto& entries = rec[lo].u2 == Mode::One ? rep.entries_mode_1 : rep.entries_mode_2;
    entries.push_back(rec[lo].energy);
  };
  for (std::size_t k = 1; k < rec.size(); ++k) {
    if (rec[k].u2 != rec[k - 1].u2) {
      close_segment(seg_begin, k - 1);
      // energy jump at the crossing: both functions evaluated at the
      // post-crossing state
      const State sc{rec[k].x, rec[k].v};
      const double jump = energy(ep, rec[k].u2, sc) - energy(ep, rec[k - 1].u2, sc);
      if (jump > 0.0) {
        ++rep.n_upward_jumps;
        rep.max_upward_jump = std::max(rep.max_upward_jump, jump);
      }
      seg_begin = k;
    }
  }
  close_segment(seg_begin, rec.size() - 1);

  rep.max_segment_violation = worst;
  rep.segments_ok = worst <= rel_tol;

  auto strictly_decreasing = [](const std::vector<double>& e) {
    for (std::size_t k = 1; k < e.size(); ++k)
      if (!(e[k] < e[k - 1])) return false;
    return true;
  };
  rep.reentry_ok = strictly_decreasing(rep.entries_mode_1) &&
                   strictly_decreasing(rep.entries_mode_2);
  rep.ok = rep.segments_ok && rep.reentry_ok;
  return rep;
}

}  // namespace hcdp
