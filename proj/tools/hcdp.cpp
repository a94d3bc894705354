// Batch front end for the controller-synthesis pipeline: solve the grid
// optimal-control problem, distill the tabular policy into a switched PD
// law, verify stability of that law, simulate the closed loop, and export
// plot-ready CSV bundles.
//
// Exit codes: 0 success, 2 config/usage error, 3 solver/fit failure,
// 4 verification failure, 5 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcdp/io.hpp"
#include "hcdp/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hcdp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerify = 4;
constexpr int kExitIo = 5;

std::string out_path(const std::string& out_dir, const std::string& name) {
  return (fs::path(out_dir) / name).string();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

json report_to_json(const SolveReport& r) {
  return {{"iterations", r.iterations},
          {"final_residual", r.final_residual},
          {"converged", r.converged},
          {"wall_time_s", r.wall_time},
          {"residual_history", r.residual_history}};
}

Snapshot run_solve(const Config& cfg) {
  const GridSpec grid = cfg.grid();
  SolveResult res = value_iteration(cfg.actuator, cfg.cost, grid, cfg.term, cfg.solver);
  Snapshot snap;
  snap.grid = grid;
  snap.kind = cfg.cost.kind;
  snap.u1_max = cfg.actuator.u1_max;
  snap.v_gate = cfg.actuator.v_gate;
  snap.value = std::move(res.value);
  snap.policy = std::move(res.policy);
  if (!res.report.converged)
    throw std::runtime_error("value iteration did not converge within max_iter (residual " +
                             std::to_string(res.report.final_residual) + ")");
  snap.policy.feasible = snap.value.feasible;
  return snap;
}

// solve + write outputs; returns the report separately so callers can decide
// on convergence handling.
int cmd_solve(const Config& cfg, const std::string& out_dir) {
  const GridSpec grid = cfg.grid();
  SolveResult res = value_iteration(cfg.actuator, cfg.cost, grid, cfg.term, cfg.solver);
  const std::string kind = cost_kind_name(cfg.cost.kind);

  Snapshot snap;
  snap.grid = grid;
  snap.kind = cfg.cost.kind;
  snap.u1_max = cfg.actuator.u1_max;
  snap.v_gate = cfg.actuator.v_gate;
  snap.value = std::move(res.value);
  snap.policy = std::move(res.policy);

  save_snapshot(out_path(out_dir, "solve_" + kind + ".snap"), snap);
  write_table_csv(out_path(out_dir, "table_" + kind + ".csv"), snap.value, snap.policy);
  write_json(out_path(out_dir, "report_" + kind + ".json"), report_to_json(res.report));

  if (!res.report.converged) {
    std::cerr << "solve: not converged after " << res.report.iterations
              << " iterations (residual " << res.report.final_residual << ")\n";
    return kExitSolver;
  }
  std::cout << "solve: " << kind << " converged in " << res.report.iterations
            << " iterations (" << res.report.wall_time << " s)\n";
  return 0;
}

int cmd_fit(const Config& cfg, const std::string& snapshot_path,
            const std::string& out_dir) {
  Snapshot snap = load_snapshot(snapshot_path);
  if (snap.kind != CostKind::Quadratic)
    std::cerr << "fit: warning: snapshot is from a " << cost_kind_name(snap.kind)
              << " solve; the piecewise PD distillation is defined for the "
                 "quadratic cost\n";
  auto [law, report] =
      distill(snap.policy, snap.grid, snap.u1_max, cfg.fit_threshold, &cfg.term);
  save_law(out_path(out_dir, "law.json"), law, snap.kind);
  write_json(out_path(out_dir, "fit_report.json"),
             {{"n_samples_1", report.n_samples_1},
              {"n_samples_2", report.n_samples_2},
              {"n_saturated_1", report.n_saturated_1},
              {"n_saturated_2", report.n_saturated_2},
              {"rms_residual_1", report.rms_residual_1},
              {"rms_residual_2", report.rms_residual_2}});
  std::cout << "fit: k_p1=" << law.k_p1 << " k_d1=" << law.k_d1
            << " k_p2=" << law.k_p2 << " k_d2=" << law.k_d2 << "\n";
  return 0;
}

int cmd_verify(const Config& cfg, const std::string& law_path,
               const std::string& out_dir) {
  auto [law, kind] = load_law(law_path);
  (void)kind;
  const StabilityVerdict verdict = verify_algebraic(cfg.actuator, law);
  const EnergyParams ep = verdict.witness;

  json per_state = json::array();
  bool all_ok = verdict.algebraic_ok;
  const auto& vs = cfg.verify;
  const ActuatorParams& p = cfg.actuator;
  int n_run = 0;
  for (int i = 0; i < vs.n_x; ++i) {
    for (int j = 0; j < vs.n_v; ++j) {
      const double fx = vs.n_x > 1 ? double(i) / (vs.n_x - 1) * 2.0 - 1.0 : 0.0;
      const double fv = vs.n_v > 1 ? double(j) / (vs.n_v - 1) * 2.0 - 1.0 : 0.0;
      const State s0{fx * vs.x_frac * (fx >= 0 ? p.x_max : -p.x_min),
                     fv * vs.v_frac * (fv >= 0 ? p.v_max : -p.v_min)};
      SimOptions so;
      so.dt_control = cfg.dt_control;
      so.substeps = cfg.substeps;
      so.energy = &ep;
      Trajectory traj = simulate(p, cfg.cost, law, s0, vs.t_final, so);
      MonotoneReport rep = verify_monotone(traj, ep, vs.rel_tol);
      const auto& last = traj.records.back();
      const bool in_bounds = traj.status != SimStatus::ExitedBounds;
      const bool ok = rep.ok && in_bounds;
      all_ok = all_ok && ok;
      ++n_run;
      per_state.push_back({{"x0", s0.x},
                           {"v0", s0.v},
                           {"monotone_ok", rep.ok},
                           {"in_bounds", in_bounds},
                           {"segments", rep.n_segments},
                           {"max_segment_violation", rep.max_segment_violation},
                           {"upward_jumps", rep.n_upward_jumps},
                           {"final_x", last.x},
                           {"final_v", last.v}});
      if (i == 0 && j == 0)
        write_trajectory_csv(out_path(out_dir, "verify_energy_example.csv"), traj);
    }
  }

  write_json(out_path(out_dir, "verdict.json"),
             {{"algebraic",
               {{"kp1_positive", verdict.kp1_positive},
                {"kp2_positive", verdict.kp2_positive},
                {"dissipation_1_positive", verdict.dissipation_1_positive},
                {"dissipation_2_positive", verdict.dissipation_2_positive},
                {"crossing_map_monotone", verdict.crossing_map_monotone},
                {"algebraic_ok", verdict.algebraic_ok},
                {"inertial_load_assumption", verdict.inertial_load_assumption}}},
              {"empirical", {{"n_states", n_run}, {"states", per_state}}},
              {"ok", all_ok}});
  std::cout << "verify: algebraic_ok=" << verdict.algebraic_ok
            << " empirical over " << n_run << " states: " << (all_ok ? "ok" : "FAILED")
            << "\n";
  return all_ok ? 0 : kExitVerify;
}

PolicySource make_source(const std::string& kind, const PiecewiseLinearLaw* law,
                         const Snapshot* snap) {
  if (kind == "law") {
    if (!law) throw ConfigError("scenario needs --law");
    return *law;
  }
  if (kind == "tabular") {
    if (!snap) throw ConfigError("scenario needs --snapshot");
    return TabularSource{&snap->policy, snap->grid};
  }
  return ControlInput{0.0, Mode::One};
}

int cmd_simulate(const Config& cfg, const std::string& law_path,
                 const std::string& snapshot_path, const std::string& out_dir) {
  PiecewiseLinearLaw law{};
  bool have_law = false;
  Snapshot snap;
  bool have_snap = false;
  if (!law_path.empty()) {
    law = load_law(law_path).first;
    have_law = true;
  }
  if (!snapshot_path.empty()) {
    snap = load_snapshot(snapshot_path);
    have_snap = true;
  }

  const EnergyParams ep =
      have_law ? EnergyParams::from(cfg.actuator, law) : EnergyParams{};
  int idx = 0;
  for (const auto& sc : cfg.scenarios) {
    PolicySource src = make_source(sc.source, have_law ? &law : nullptr,
                                   have_snap ? &snap : nullptr);
    SimOptions so;
    so.dt_control = cfg.dt_control;
    so.substeps = cfg.substeps;
    so.term = &cfg.term;
    if (have_law && sc.source == "law") so.energy = &ep;
    Trajectory traj = simulate(cfg.actuator, cfg.cost, src, sc.start, cfg.t_final, so);
    const std::string name = "trajectory_" + std::to_string(idx) + "_" + sc.source + ".csv";
    write_trajectory_csv(out_path(out_dir, name), traj);
    std::cout << "simulate: scenario " << idx << " (" << sc.source << ") -> "
              << name << " (" << traj.records.size() << " records, cost "
              << accumulated_cost(traj) << ")\n";
    ++idx;
  }

  if (have_law) {
    const auto field = phase_field(cfg.actuator, law, cfg.phase_nx, cfg.phase_nv);
    write_phase_csv(out_path(out_dir, "phase_field.csv"), field);
  }
  return 0;
}

// Write the distilled-law surface next to the tabular torque policy
// (residual per unsaturated feasible cell).
void write_law_residual_csv(const std::string& path, const Snapshot& snap,
                            const PiecewiseLinearLaw& law) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out << "x,v,u1_table,u1_law,residual,zone\n";
  out << std::setprecision(17);
  const GridSpec& g = snap.grid;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      const std::size_t c = g.idx(i, j);
      if (!snap.value.feasible[c]) continue;
      const State s{g.x_at(i), g.v_at(j)};
      const double u_tab = snap.policy.u1_star[c];
      const double u_law = evaluate_law(law, s).u1;
      const int zone = std::abs(s.v) >= law.threshold ? 1 : 2;
      out << s.x << ',' << s.v << ',' << u_tab << ',' << u_law << ','
          << (u_law - u_tab) << ',' << zone << '\n';
    }
}

int cmd_export_figures(Config cfg, const std::string& out_dir) {
  // Fig. 5-7 bundles: cost-to-go, torque policy, mode policy per cost kind.
  Snapshot quad_snap;
  for (CostKind kind : {CostKind::MinTime, CostKind::MinEnergy, CostKind::Quadratic}) {
    cfg.cost.kind = kind;
    const std::string name = cost_kind_name(kind);
    std::cout << "export-figures: solving " << name << "...\n";
    Snapshot snap = run_solve(cfg);
    write_table_csv(out_path(out_dir, "fig5_" + name + "_cost_to_go.csv"),
                    snap.value, snap.policy);
    write_table_csv(out_path(out_dir, "fig6_" + name + "_torque_policy.csv"),
                    snap.value, snap.policy);
    write_table_csv(out_path(out_dir, "fig7_" + name + "_mode_policy.csv"),
                    snap.value, snap.policy);
    if (kind == CostKind::Quadratic) quad_snap = std::move(snap);
  }
  cfg.cost.kind = CostKind::Quadratic;

  // Fig. 8 bundle: distilled law vs the quadratic table.
  auto [law, report] = distill(quad_snap.policy, quad_snap.grid, quad_snap.u1_max,
                               cfg.fit_threshold, &cfg.term);
  save_law(out_path(out_dir, "fig8_law.json"), law, CostKind::Quadratic);
  write_law_residual_csv(out_path(out_dir, "fig8_law_residual.csv"), quad_snap, law);

  // Fig. 9 bundle: closed-loop trajectories under the law plus the phase field.
  const EnergyParams ep = EnergyParams::from(cfg.actuator, law);
  int idx = 0;
  for (const auto& sc : cfg.scenarios) {
    PolicySource src = make_source(sc.source, &law, &quad_snap);
    SimOptions so;
    so.dt_control = cfg.dt_control;
    so.substeps = cfg.substeps;
    so.term = &cfg.term;
    so.energy = &ep;
    Trajectory traj = simulate(cfg.actuator, cfg.cost, src, sc.start, cfg.t_final, so);
    write_trajectory_csv(
        out_path(out_dir, "fig9_trajectory_" + std::to_string(idx) + ".csv"), traj);
    ++idx;
  }
  write_phase_csv(out_path(out_dir, "fig9_phase_field.csv"),
                  phase_field(cfg.actuator, law, cfg.phase_nx, cfg.phase_nv));
  std::cout << "export-figures: wrote fig5_*–fig9_* bundles to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-speed actuator controller synthesis pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", snapshot_path, law_path;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--snapshot", snapshot_path, "solve snapshot input");
  app.add_option("--law", law_path, "law file input");

  auto* solve = app.add_subcommand("solve", "run value iteration, write tables + snapshot");
  auto* fit = app.add_subcommand("fit", "distill a quadratic snapshot into a PD law");
  auto* verify = app.add_subcommand("verify", "algebraic + empirical stability checks");
  auto* simulate = app.add_subcommand("simulate", "run configured closed-loop scenarios");
  auto* figures = app.add_subcommand("export-figures", "emit plot-ready CSV bundles");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config cfg = load_config(config_path);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    if (solve->parsed()) return cmd_solve(cfg, out_dir);
    if (fit->parsed()) {
      if (snapshot_path.empty()) {
        std::cerr << "fit: --snapshot is required\n";
        return kExitConfig;
      }
      return cmd_fit(cfg, snapshot_path, out_dir);
    }
    if (verify->parsed()) {
      if (law_path.empty()) {
        std::cerr << "verify: --law is required\n";
        return kExitConfig;
      }
      return cmd_verify(cfg, law_path, out_dir);
    }
    if (simulate->parsed()) return cmd_simulate(cfg, law_path, snapshot_path, out_dir);
    if (figures->parsed()) return cmd_export_figures(cfg, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}
