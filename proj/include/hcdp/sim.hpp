#pragma once

// Closed-loop simulation of the actuator under any policy source: tabular
// policy lookup, distilled switched PD law, or a constant input. Control is
// zero-order-hold at the DP backup step with finer physics substeps; mode
// changes are instantaneous with velocity continuity.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hcdp/dp.hpp"
#include "hcdp/fit.hpp"
#include "hcdp/model.hpp"
#include "hcdp/stability.hpp"

namespace hcdp {

struct TabularSource {
  const PolicyTable* policy;
  GridSpec spec;
};

using PolicySource = std::variant<TabularSource, PiecewiseLinearLaw, ControlInput>;

inline ControlInput query_source(const PolicySource& src, const ActuatorParams& p,
                                 const State& s) {
  ControlInput u = std::visit(
      [&](const auto& v) -> ControlInput {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TabularSource>)
          return policy_lookup(*v.policy, v.spec, p, s);
        else if constexpr (std::is_same_v<T, PiecewiseLinearLaw>)
          return evaluate_law(v, s);
        else
          return v;
      },
      src);
  if (std::abs(s.v) > p.v_gate) u.u2 = Mode::One;  // gate always wins
  return u;
}

inline std::string source_description(const PolicySource& src) {
  if (std::holds_alternative<TabularSource>(src)) return "tabular";
  if (std::holds_alternative<PiecewiseLinearLaw>(src)) return "law";
  return "constant";
}

struct TrajectoryRecord {
  double t;
  double x;
  double v;
  double u1;       // input held over [t, t + dt_control)
  Mode u2;
  double stage_cost;  // rate g at this sample
  double energy;      // active-mode switched energy, NaN when not annotated
  bool in_bounds;
};

enum class SimStatus { Completed, Settled, ExitedBounds };

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  SimStatus status = SimStatus::Completed;
  double exit_time = 0.0;  // meaningful when status == ExitedBounds
  double dt_control = 0.0;
  int substeps = 0;
  std::string source;
};

struct SimOptions {
  double dt_control = 0.02;
  int substeps = 10;
  int settle_hold = 5;                    // consecutive in-target control steps
  const TerminationSpec* term = nullptr;  // enables early settling
  const EnergyParams* energy = nullptr;   // enables energy annotation
};

inline Trajectory simulate(const ActuatorParams& params, const CostWeights& weights,
                           const PolicySource& source, const State& start,
                           double t_final, const SimOptions& opt = {}) {
  params.validate();
  if (!params.in_bounds(start))
    throw std::invalid_argument("simulate: start state outside bounds");
  if (!(t_final > 0.0) || !(opt.dt_control > 0.0) || opt.substeps < 1)
    throw std::invalid_argument("simulate: bad time parameters");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  Trajectory traj;
  traj.dt_control = opt.dt_control;
  traj.substeps = opt.substeps;
  traj.source = source_description(source);

  const double h = opt.dt_control / opt.substeps;
  State s = start;
  int hold = 0;
  const int n_steps = int(std::ceil(t_final / opt.dt_control - 1e-9));

  for (int k = 0; k <= n_steps; ++k) {
    const double t = k * opt.dt_control;
    const ControlInput u = query_source(source, params, s);
    const double e = opt.energy ? energy(*opt.energy, u.u2, s) : nan;
    traj.records.push_back({t, s.x, s.v, u.u1, u.u2,
                            stage_cost(weights, s, u), e, params.in_bounds(s)});
    if (opt.term) {
      hold = opt.term->in_target(s) ? hold + 1 : 0;
      if (hold >= opt.settle_hold) {
        traj.status = SimStatus::Settled;
        return traj;
      }
    }
    if (k == n_steps) break;
    for (int m = 0; m < opt.substeps; ++m) s = step(params, s, u, h);
    if (!params.in_bounds(s)) {
      const double t_exit = (k + 1) * opt.dt_control;
      const ControlInput ue = query_source(source, params,
                                           {std::clamp(s.x, params.x_min, params.x_max),
                                            std::clamp(s.v, params.v_min, params.v_max)});
      traj.records.push_back({t_exit, s.x, s.v, ue.u1, ue.u2,
                              stage_cost(weights, s, ue),
                              opt.energy ? energy(*opt.energy, ue.u2, s) : nan, false});
      traj.status = SimStatus::ExitedBounds;
      traj.exit_time = t_exit;
      return traj;
    }
  }
  return traj;
}

// Trapezoidal integral of the recorded stage-cost rate.
inline double accumulated_cost(const Trajectory& traj) {
  double acc = 0.0;
  for (std::size_t k = 1; k < traj.records.size(); ++k) {
    const auto& a = traj.records[k - 1];
    const auto& b = traj.records[k];
    acc += 0.5 * (a.stage_cost + b.stage_cost) * (b.t - a.t);
  }
  return acc;
}

// One arrow of the phase-plane field: state derivatives under free dynamics
// (zero torque, same mode) and under the closed loop.
struct PhaseSample {
  double x, v;
  double vdot_natural;
  double vdot_closed;
  double u1;
  Mode u2;
};

inline std::vector<PhaseSample> phase_field(const ActuatorParams& params,
                                            const PolicySource& source,
                                            int nx, int nv) {
  std::vector<PhaseSample> out;
  out.reserve(std::size_t(nx) * nv);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nv; ++j) {
      const State s{params.x_min + (params.x_max - params.x_min) * i / (nx - 1),
                    params.v_min + (params.v_max - params.v_min) * j / (nv - 1)};
      ControlInput u;
      try {
        u = query_source(source, params, s);
      } catch (const std::domain_error&) {
        continue;  // infeasible tabular cell: no arrow
      }
      out.push_back({s.x, s.v, acceleration(params, s, {0.0, u.u2}),
                     acceleration(params, s, u), u.u1, u.u2});
    }
  }
  return out;
}

}  // namespace hcdp
