#pragma once

// Grid value iteration for the constrained hybrid optimal control problem:
// synchronous Bellman sweeps over an (x, v) grid with a discretized torque
// ladder, both gear modes (speed-gated), and absorbing on-target /
// out-of-bound termination states.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <vector>

#include "hcdp/grid.hpp"
#include "hcdp/model.hpp"

namespace hcdp {

struct TerminationSpec {
  double target_half_width_x = 0.003;   // m
  double target_half_width_v = 0.010;   // m/s
  double out_of_bound_cost = 1.0e6;
  double target_cost = 0.0;

  void validate(const GridSpec& g) const {
    if (!(target_half_width_x > 0.0) || !(target_half_width_v > 0.0))
      throw std::invalid_argument("TerminationSpec: half-widths must be positive");
    // narrower than one cell makes the absorbing state unreachable under
    // bilinear interpolation
    if (target_half_width_x < g.hx() || target_half_width_v < g.hv())
      throw std::invalid_argument("TerminationSpec: target box narrower than one grid cell");
    if (!(out_of_bound_cost > 0.0))
      throw std::invalid_argument("TerminationSpec: out_of_bound_cost must be positive");
  }

  bool in_target(const State& s) const {
    return std::abs(s.x) <= target_half_width_x &&
           std::abs(s.v) <= target_half_width_v;
  }
};

struct ValueTable {
  GridSpec grid;
  std::vector<double> values;     // cost-to-go, row-major [i * n_v + j]
  std::vector<std::uint8_t> feasible;
};

struct PolicyTable {
  GridSpec grid;
  std::vector<double> u1_star;
  std::vector<std::uint8_t> u2_star;   // 1 or 2
  std::vector<std::uint8_t> feasible;
};

struct SolveReport {
  int iterations = 0;
  double final_residual = 0.0;
  double wall_time = 0.0;  // s
  bool converged = false;
  std::vector<double> residual_history;
};

struct SolveResult {
  ValueTable value;
  PolicyTable policy;
  SolveReport report;
};

struct SolveOptions {
  double tol = 1.0e-6;   // per-cell relative value change
  int max_iter = 5000;
  double discount = 1.0;
  int threads = 0;       // 0 = hardware concurrency
};

// Stage cost split into an x-only part and a (v, u1) part; both Bellman
// paths (the per-cell reference backup and the precomputed sweep) must sum
// them in the same order.
inline std::pair<double, double> split_stage_cost(const CostWeights& w,
                                                  const State& s,
                                                  const ControlInput& u) {
  switch (w.kind) {
    case CostKind::Quadratic:
      return {w.w1 * s.x * s.x, w.w2 * s.v * s.v + w.w3 * u.u1 * u.u1};
    case CostKind::MinTime:
      return {0.0, 1.0};
    case CostKind::MinEnergy:
      return {0.0, u.u1 * u.u1};
  }
  return {0.0, 0.0};
}

// Admissible hybrid actions at a state: the full torque ladder crossed with
// both modes below the speed gate, mode 1 only above it. Returned in
// tie-break preference order (smaller |u1|, then mode 1, then negative u1),
// so an argmin that keeps the first strictly-better candidate implements
// the solver's deterministic tie-breaking.
inline std::vector<ControlInput> admissible_actions(const GridSpec& spec,
                                                    const ActuatorParams& params,
                                                    const State& state) {
  const bool gated = std::abs(state.v) > params.v_gate;
  std::vector<ControlInput> out;
  out.reserve(std::size_t(spec.n_u1) * (gated ? 1 : 2));
  for (int k = 0; k < spec.n_u1; ++k) {
    const double u1 = spec.torque_level(k, params.u1_max);
    out.push_back({u1, Mode::One});
    if (!gated) out.push_back({u1, Mode::Two});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ControlInput& a, const ControlInput& b) {
                     return std::make_tuple(std::abs(a.u1), mode_index(a.u2),
                                            a.u1 >= 0.0) <
                            std::make_tuple(std::abs(b.u1), mode_index(b.u2),
                                            b.u1 >= 0.0);
                   });
  return out;
}

struct BackupResult {
  double value = 0.0;
  ControlInput best{};
  bool terminal = false;
};

// One Bellman backup of a single cell against a read-only value table.
// Straightforward per-cell form; value_iteration below runs the same math
// with per-velocity-row precomputation.
inline BackupResult bellman_backup(const ValueTable& value, int i, int j,
                                   const ActuatorParams& params,
                                   const CostWeights& weights,
                                   const GridSpec& spec,
                                   const TerminationSpec& term,
                                   double discount = 1.0) {
  const State s{spec.x_at(i), spec.v_at(j)};
  if (term.in_target(s)) {
    // placeholder action for the absorbing state; must still respect the gate
    const Mode hold = std::abs(s.v) <= params.v_gate ? Mode::Two : Mode::One;
    return {term.target_cost, {0.0, hold}, true};
  }

  double best = std::numeric_limits<double>::infinity();
  ControlInput best_u{0.0, Mode::One};
  for (const ControlInput& u : admissible_actions(spec, params, s)) {
    const State next = step(params, s, u, spec.dt);
    double tail;
    if (!spec.contains(next)) {
      tail = term.out_of_bound_cost;
    } else if (term.in_target(next)) {
      tail = term.target_cost;
    } else {
      tail = bilinear(value.values, spec, spec.frac_i(next.x), spec.frac_j(next.v));
    }
    const auto [cx, cvu] = split_stage_cost(weights, s, u);
    const double cand = cx * spec.dt + cvu * spec.dt + discount * tail;
    if (cand < best) {
      best = cand;
      best_u = u;
    }
  }
  return {best, best_u, false};
}

namespace detail {

// Per-(action, velocity-row) quantities: the dynamics are independent of x,
// so one RK4 step from (0, v_j) gives the displacement and next velocity for
// every cell in column j at once.
struct ActionRow {
  double fdx;      // x displacement in fractional grid units
  double fj_next;  // fractional v index of the next state
  double cost_vu;  // dt-scaled (v, u1) stage cost part
  std::uint8_t admissible;
  std::uint8_t oob_v;      // next velocity out of bounds
  std::uint8_t target_v;   // next velocity inside the target band
};

struct Precomp {
  std::vector<ControlInput> actions;       // preference order
  std::vector<ActionRow> rows;             // [a * n_v + j]
  std::vector<double> cost_x;              // dt-scaled x stage cost per i
  std::vector<std::uint8_t> cell_target;   // per cell index
  std::vector<std::uint8_t> hold_mode;     // gate-respecting target placeholder, per j
  double fi_target_lo, fi_target_hi;       // target band in fractional x units
};

inline Precomp precompute(const ActuatorParams& params, const CostWeights& weights,
                          const GridSpec& spec, const TerminationSpec& term) {
  Precomp pc;
  pc.actions = admissible_actions(spec, params, State{0.0, 0.0});  // ungated set
  const int na = int(pc.actions.size());
  pc.rows.resize(std::size_t(na) * spec.n_v);
  for (int a = 0; a < na; ++a) {
    const ControlInput& u = pc.actions[a];
    for (int j = 0; j < spec.n_v; ++j) {
      const double vj = spec.v_at(j);
      ActionRow& r = pc.rows[std::size_t(a) * spec.n_v + j];
      r.admissible = !(u.u2 == Mode::Two && std::abs(vj) > params.v_gate);
      const State next = step(params, State{0.0, vj}, u, spec.dt);
      r.fdx = next.x / spec.hx();
      r.fj_next = spec.frac_j(next.v);
      r.oob_v = next.v < spec.v_min || next.v > spec.v_max;
      r.target_v = std::abs(next.v) <= term.target_half_width_v;
      r.cost_vu = split_stage_cost(weights, State{0.0, vj}, u).second * spec.dt;
    }
  }
  pc.cost_x.resize(spec.n_x);
  for (int i = 0; i < spec.n_x; ++i) {
    const double xi = spec.x_at(i);
    pc.cost_x[i] = split_stage_cost(weights, State{xi, 0.0}, ControlInput{}).first * spec.dt;
  }
  pc.hold_mode.resize(spec.n_v);
  for (int j = 0; j < spec.n_v; ++j)
    pc.hold_mode[j] = std::abs(spec.v_at(j)) <= params.v_gate ? 2 : 1;
  pc.cell_target.resize(spec.cells());
  for (int i = 0; i < spec.n_x; ++i)
    for (int j = 0; j < spec.n_v; ++j)
      pc.cell_target[spec.idx(i, j)] =
          term.in_target(State{spec.x_at(i), spec.v_at(j)});
  pc.fi_target_lo = spec.frac_i(-term.target_half_width_x);
  pc.fi_target_hi = spec.frac_i(term.target_half_width_x);
  return pc;
}

// One synchronous sweep; writes v_new and (optionally) the argmin policy.
// Rows [i_begin, i_end) only, so sweeps shard across threads.
inline void sweep_rows(const Precomp& pc, const GridSpec& spec,
                       const TerminationSpec& term, double discount,
                       const std::vector<double>& v_old,
                       std::vector<double>& v_new, PolicyTable* policy,
                       int i_begin, int i_end, double& max_rel_delta) {
  const int na = int(pc.actions.size());
  double local_delta = 0.0;
  for (int i = i_begin; i < i_end; ++i) {
    const double cxi = pc.cost_x[i];
    for (int j = 0; j < spec.n_v; ++j) {
      const std::size_t c = spec.idx(i, j);
      if (pc.cell_target[c]) {
        v_new[c] = term.target_cost;
        if (policy) {
          policy->u1_star[c] = 0.0;
          policy->u2_star[c] = pc.hold_mode[j];
          policy->feasible[c] = 1;
        }
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < na; ++a) {
        const ActionRow& r = pc.rows[std::size_t(a) * spec.n_v + j];
        if (!r.admissible) continue;
        const double fi = i + r.fdx;
        double tail;
        if (r.oob_v || fi < 0.0 || fi > spec.n_x - 1) {
          tail = term.out_of_bound_cost;
        } else if (r.target_v && fi >= pc.fi_target_lo && fi <= pc.fi_target_hi) {
          tail = term.target_cost;
        } else {
          tail = bilinear(v_old, spec, fi, r.fj_next);
        }
        const double cand = cxi + r.cost_vu + discount * tail;
        if (cand < best) {
          best = cand;
          best_a = a;
        }
      }
      v_new[c] = best;
      const double d = std::abs(best - v_old[c]) / std::max(std::abs(best), 1e-300);
      if (d > local_delta) local_delta = d;
      if (policy) {
        policy->u1_star[c] = pc.actions[best_a].u1;
        policy->u2_star[c] = std::uint8_t(mode_index(pc.actions[best_a].u2));
        policy->feasible[c] = best < term.out_of_bound_cost;
      }
    }
  }
  max_rel_delta = local_delta;
}

}  // namespace detail

// Infinite-horizon value iteration with synchronous (Jacobi) sweeps.
// Values start at the out-of-bound cost everywhere outside the target box;
// iterating from above gives the proper cost-to-go even for cost kinds with
// zero-cost dawdling (min-energy at rest). Deterministic regardless of
// thread count: cells within a sweep are independent.
inline SolveResult value_iteration(const ActuatorParams& params,
                                   const CostWeights& weights,
                                   const GridSpec& spec,
                                   const TerminationSpec& term,
                                   const SolveOptions& opt = {}) {
  params.validate();
  weights.validate();
  spec.validate();
  term.validate(spec);
  if (!(opt.tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  if (!(opt.discount > 0.0 && opt.discount <= 1.0))
    throw std::invalid_argument("value_iteration: discount must be in (0, 1]");

  const auto t0 = std::chrono::steady_clock::now();
  const detail::Precomp pc = detail::precompute(params, weights, spec, term);

  SolveResult res;
  res.value.grid = spec;
  res.policy.grid = spec;
  res.value.values.assign(spec.cells(), term.out_of_bound_cost);
  res.value.feasible.assign(spec.cells(), 0);
  res.policy.u1_star.assign(spec.cells(), 0.0);
  res.policy.u2_star.assign(spec.cells(), 1);
  res.policy.feasible.assign(spec.cells(), 0);
  for (std::size_t c = 0; c < spec.cells(); ++c)
    if (pc.cell_target[c]) res.value.values[c] = term.target_cost;

  int n_threads = opt.threads > 0 ? opt.threads
                                  : int(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min(n_threads, spec.n_x);

  std::vector<double> v_old = res.value.values;
  std::vector<double> v_new(spec.cells());

  auto run_sweep = [&](PolicyTable* policy) {
    std::vector<double> deltas(n_threads, 0.0);
    std::vector<std::thread> pool;
    const int chunk = (spec.n_x + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(spec.n_x, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, t, lo, hi] {
        detail::sweep_rows(pc, spec, term, opt.discount, v_old, v_new, policy,
                           lo, hi, deltas[t]);
      });
    }
    for (auto& th : pool) th.join();
    double d = 0.0;
    for (double dv : deltas) d = std::max(d, dv);
    return d;
  };

  bool converged = false;
  double residual = 0.0;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    const double delta = run_sweep(nullptr);
    v_old.swap(v_new);
    residual = delta;
    res.report.residual_history.push_back(delta);
    if (delta <= opt.tol) {
      converged = true;
      ++iter;
      break;
    }
  }

  // one extra recording sweep fixes the argmin policy against the converged
  // values and leaves values and policy mutually consistent
  run_sweep(&res.policy);
  res.value.values = std::move(v_new);
  for (std::size_t c = 0; c < spec.cells(); ++c)
    res.value.feasible[c] = res.value.values[c] < term.out_of_bound_cost;

  res.report.iterations = iter;
  res.report.final_residual = residual;
  res.report.converged = converged;
  res.report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Continuous-state evaluation of a tabular policy: nearest-cell mode lookup,
// bilinear torque interpolation restricted to cells sharing that mode, with
// the speed gate re-enforced on the output.
inline ControlInput policy_lookup(const PolicyTable& policy, const GridSpec& spec,
                                  const ActuatorParams& params, const State& s) {
  if (!spec.contains(s))
    throw std::domain_error("policy_lookup: state outside grid bounds");
  const int ni = spec.nearest_i(s.x);
  const int nj = spec.nearest_j(s.v);
  if (!policy.feasible[spec.idx(ni, nj)])
    throw std::domain_error("policy_lookup: state in infeasible region");

  std::uint8_t mode = policy.u2_star[spec.idx(ni, nj)];
  if (std::abs(s.v) > params.v_gate) mode = 1;

  const double fi = spec.frac_i(s.x);
  const double fj = spec.frac_j(s.v);
  int i0 = std::min(int(fi), spec.n_x - 2);
  int j0 = std::min(int(fj), spec.n_v - 2);
  const double wi = fi - i0, wj = fj - j0;

  double num = 0.0, den = 0.0;
  const double w[4] = {(1 - wi) * (1 - wj), (1 - wi) * wj, wi * (1 - wj), wi * wj};
  const int di[4] = {0, 0, 1, 1};
  const int dj[4] = {0, 1, 0, 1};
  for (int k = 0; k < 4; ++k) {
    const std::size_t c = spec.idx(i0 + di[k], j0 + dj[k]);
    if (policy.feasible[c] && policy.u2_star[c] == mode) {
      num += w[k] * policy.u1_star[c];
      den += w[k];
    }
  }

  double u1;
  if (den > 1e-12) {
    u1 = num / den;
  } else {
    // no same-mode corner: expanding ring search for the nearest feasible
    // same-mode cell
    u1 = 0.0;
    bool found = false;
    for (int rad = 1; rad < std::max(spec.n_x, spec.n_v) && !found; ++rad) {
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int i = std::max(0, ni - rad); i <= std::min(spec.n_x - 1, ni + rad); ++i) {
        for (int j = std::max(0, nj - rad); j <= std::min(spec.n_v - 1, nj + rad); ++j) {
          if (std::max(std::abs(i - ni), std::abs(j - nj)) != rad) continue;
          const std::size_t c = spec.idx(i, j);
          if (!policy.feasible[c] || policy.u2_star[c] != mode) continue;
          const double dx = (spec.x_at(i) - s.x) / (spec.x_max - spec.x_min);
          const double dv = (spec.v_at(j) - s.v) / (spec.v_max - spec.v_min);
          const double d2 = dx * dx + dv * dv;
          if (d2 < best_d2) {
            best_d2 = d2;
            u1 = policy.u1_star[c];
            found = true;
          }
        }
      }
    }
    if (!found) throw std::domain_error("policy_lookup: no feasible cell with required mode");
  }

  u1 = std::clamp(u1, -params.u1_max, params.u1_max);
  return {u1, mode_from_int(mode)};
}

}  // namespace hcdp
