#pragma once

// File formats: CSV table/trajectory exports, the versioned binary solve
// snapshot (magic "HCDP"), the human-readable law file, and the experiment
// config. Configs use millimetre units where the problem is naturally
// stated in mm; conversion to SI happens here, at the interface layer.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcdp/dp.hpp"
#include "hcdp/fit.hpp"
#include "hcdp/model.hpp"
#include "hcdp/sim.hpp"

namespace hcdp {

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- config

struct SimScenario {
  State start;
  std::string source = "law";  // "law" | "tabular" | "zero"
};

// Batch of initial states for the empirical stability check: an n_x × n_v
// grid spanning the given fractions of the state bounds.
struct VerifySpec {
  int n_x = 10, n_v = 10;
  double x_frac = 0.8;
  double v_frac = 0.5;
  double t_final = 60.0;
  double rel_tol = 1e-3;
};

struct Config {
  ActuatorParams actuator;
  CostWeights cost;
  int n_x = 501, n_v = 501, n_u1 = 51;
  double dp_dt = 0.02;
  TerminationSpec term;
  SolveOptions solver;
  double fit_threshold = 0.020;  // m/s
  double t_final = 10.0;
  double dt_control = 0.02;
  int substeps = 10;
  std::vector<SimScenario> scenarios;
  int phase_nx = 21, phase_nv = 21;
  VerifySpec verify;

  GridSpec grid() const {
    return GridSpec::from_params(actuator, n_x, n_v, n_u1, dp_dt);
  }
  void validate() const {
    actuator.validate();
    cost.validate();
    term.validate(grid());
    if (!(fit_threshold > 0.0) || fit_threshold > actuator.v_gate)
      throw ConfigError("fit.threshold must be in (0, v_gate]");
    if (!(t_final > 0.0) || !(dt_control > 0.0) || substeps < 1)
      throw ConfigError("bad simulation timing");
    for (const auto& sc : scenarios) {
      if (!actuator.in_bounds(sc.start))
        throw ConfigError("scenario start state outside bounds");
      if (sc.source != "law" && sc.source != "tabular" && sc.source != "zero")
        throw ConfigError("scenario source must be law|tabular|zero");
    }
    if (verify.n_x < 1 || verify.n_v < 1 || !(verify.t_final > 0.0) ||
        !(verify.x_frac > 0.0) || verify.x_frac > 1.0 ||
        !(verify.v_frac > 0.0) || verify.v_frac > 1.0 || !(verify.rel_tol > 0.0))
      throw ConfigError("bad verify section");
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::string& where,
                         const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const nlohmann::json& j, const std::string& where, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline Config parse_config(const nlohmann::json& j) {
  using detail::get;
  using detail::get_or;
  detail::require_keys(j, "config",
                       {"actuator", "cost", "grid", "termination", "solver",
                        "fit", "simulation", "verify"});
  Config c;

  const auto& a = j.at("actuator");
  detail::require_keys(a, "actuator",
                       {"m_o", "b_o", "J_1", "J_2", "b_1", "b_2", "R_1", "R_2",
                        "screw_lead_mm", "u1_max", "v_gate_mm_s", "x_bounds_mm",
                        "v_bounds_mm_s"});
  c.actuator.m_o = get<double>(a, "actuator", "m_o");
  c.actuator.b_o = get<double>(a, "actuator", "b_o");
  c.actuator.J_1 = get<double>(a, "actuator", "J_1");
  c.actuator.J_2 = get<double>(a, "actuator", "J_2");
  c.actuator.b_1 = get<double>(a, "actuator", "b_1");
  c.actuator.b_2 = get<double>(a, "actuator", "b_2");
  c.actuator.R_1 = get<double>(a, "actuator", "R_1");
  c.actuator.R_2 = get<double>(a, "actuator", "R_2");
  c.actuator.L_o = get<double>(a, "actuator", "screw_lead_mm") / 1000.0 / (2.0 * M_PI);
  c.actuator.u1_max = get<double>(a, "actuator", "u1_max");
  c.actuator.v_gate = get<double>(a, "actuator", "v_gate_mm_s") / 1000.0;
  const auto xb = get<std::vector<double>>(a, "actuator", "x_bounds_mm");
  const auto vb = get<std::vector<double>>(a, "actuator", "v_bounds_mm_s");
  if (xb.size() != 2 || vb.size() != 2)
    throw ConfigError("actuator: bounds must be [min, max]");
  c.actuator.x_min = xb[0] / 1000.0;
  c.actuator.x_max = xb[1] / 1000.0;
  c.actuator.v_min = vb[0] / 1000.0;
  c.actuator.v_max = vb[1] / 1000.0;

  const auto& co = j.at("cost");
  detail::require_keys(co, "cost", {"kind", "w1", "w2", "w3"});
  c.cost.kind = cost_kind_from_name(get<std::string>(co, "cost", "kind"));
  c.cost.w1 = get_or(co, "w1", c.cost.w1);
  c.cost.w2 = get_or(co, "w2", c.cost.w2);
  c.cost.w3 = get_or(co, "w3", c.cost.w3);

  const auto& g = j.at("grid");
  detail::require_keys(g, "grid", {"n_x", "n_v", "n_u1", "dt"});
  c.n_x = get<int>(g, "grid", "n_x");
  c.n_v = get<int>(g, "grid", "n_v");
  c.n_u1 = get<int>(g, "grid", "n_u1");
  c.dp_dt = get<double>(g, "grid", "dt");

  const auto& t = j.at("termination");
  detail::require_keys(t, "termination",
                       {"target_half_width_x_mm", "target_half_width_v_mm_s",
                        "out_of_bound_cost"});
  c.term.target_half_width_x = get<double>(t, "termination", "target_half_width_x_mm") / 1000.0;
  c.term.target_half_width_v = get<double>(t, "termination", "target_half_width_v_mm_s") / 1000.0;
  c.term.out_of_bound_cost = get<double>(t, "termination", "out_of_bound_cost");

  const auto& s = j.at("solver");
  detail::require_keys(s, "solver", {"tol", "max_iter", "discount", "threads"});
  c.solver.tol = get<double>(s, "solver", "tol");
  c.solver.max_iter = get<int>(s, "solver", "max_iter");
  c.solver.discount = get_or(s, "discount", 1.0);
  c.solver.threads = get_or(s, "threads", 0);

  const auto& f = j.at("fit");
  detail::require_keys(f, "fit", {"threshold_mm_s"});
  c.fit_threshold = get<double>(f, "fit", "threshold_mm_s") / 1000.0;

  const auto& sim = j.at("simulation");
  detail::require_keys(sim, "simulation",
                       {"t_final", "dt_control", "substeps", "scenarios",
                        "phase_grid"});
  c.t_final = get<double>(sim, "simulation", "t_final");
  c.dt_control = get<double>(sim, "simulation", "dt_control");
  c.substeps = get<int>(sim, "simulation", "substeps");
  c.scenarios.clear();
  for (const auto& sc : sim.at("scenarios")) {
    detail::require_keys(sc, "scenario", {"x0_mm", "v0_mm_s", "source"});
    SimScenario scen;
    scen.start.x = get<double>(sc, "scenario", "x0_mm") / 1000.0;
    scen.start.v = get<double>(sc, "scenario", "v0_mm_s") / 1000.0;
    scen.source = detail::get_or<std::string>(sc, "source", "law");
    c.scenarios.push_back(scen);
  }
  const auto pg = get<std::vector<int>>(sim, "simulation", "phase_grid");
  if (pg.size() != 2) throw ConfigError("simulation: phase_grid must be [nx, nv]");
  c.phase_nx = pg[0];
  c.phase_nv = pg[1];

  if (j.contains("verify")) {
    const auto& ve = j.at("verify");
    detail::require_keys(ve, "verify",
                         {"n_x", "n_v", "x_frac", "v_frac", "t_final", "rel_tol"});
    c.verify.n_x = get_or(ve, "n_x", c.verify.n_x);
    c.verify.n_v = get_or(ve, "n_v", c.verify.n_v);
    c.verify.x_frac = get_or(ve, "x_frac", c.verify.x_frac);
    c.verify.v_frac = get_or(ve, "v_frac", c.verify.v_frac);
    c.verify.t_final = get_or(ve, "t_final", c.verify.t_final);
    c.verify.rel_tol = get_or(ve, "rel_tol", c.verify.rel_tol);
  }

  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const Config& c) {
  nlohmann::json j;
  j["actuator"] = {{"m_o", c.actuator.m_o},
                   {"b_o", c.actuator.b_o},
                   {"J_1", c.actuator.J_1},
                   {"J_2", c.actuator.J_2},
                   {"b_1", c.actuator.b_1},
                   {"b_2", c.actuator.b_2},
                   {"R_1", c.actuator.R_1},
                   {"R_2", c.actuator.R_2},
                   {"screw_lead_mm", c.actuator.L_o * 2.0 * M_PI * 1000.0},
                   {"u1_max", c.actuator.u1_max},
                   {"v_gate_mm_s", c.actuator.v_gate * 1000.0},
                   {"x_bounds_mm", {c.actuator.x_min * 1000.0, c.actuator.x_max * 1000.0}},
                   {"v_bounds_mm_s", {c.actuator.v_min * 1000.0, c.actuator.v_max * 1000.0}}};
  j["cost"] = {{"kind", cost_kind_name(c.cost.kind)},
               {"w1", c.cost.w1},
               {"w2", c.cost.w2},
               {"w3", c.cost.w3}};
  j["grid"] = {{"n_x", c.n_x}, {"n_v", c.n_v}, {"n_u1", c.n_u1}, {"dt", c.dp_dt}};
  j["termination"] = {{"target_half_width_x_mm", c.term.target_half_width_x * 1000.0},
                      {"target_half_width_v_mm_s", c.term.target_half_width_v * 1000.0},
                      {"out_of_bound_cost", c.term.out_of_bound_cost}};
  j["solver"] = {{"tol", c.solver.tol},
                 {"max_iter", c.solver.max_iter},
                 {"discount", c.solver.discount},
                 {"threads", c.solver.threads}};
  j["fit"] = {{"threshold_mm_s", c.fit_threshold * 1000.0}};
  nlohmann::json scen = nlohmann::json::array();
  for (const auto& sc : c.scenarios)
    scen.push_back({{"x0_mm", sc.start.x * 1000.0},
                    {"v0_mm_s", sc.start.v * 1000.0},
                    {"source", sc.source}});
  j["simulation"] = {{"t_final", c.t_final},
                     {"dt_control", c.dt_control},
                     {"substeps", c.substeps},
                     {"scenarios", scen},
                     {"phase_grid", {c.phase_nx, c.phase_nv}}};
  j["verify"] = {{"n_x", c.verify.n_x},
                 {"n_v", c.verify.n_v},
                 {"x_frac", c.verify.x_frac},
                 {"v_frac", c.verify.v_frac},
                 {"t_final", c.verify.t_final},
                 {"rel_tol", c.verify.rel_tol}};
  return j;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

// ------------------------------------------------------------------- law

inline void save_law(const std::string& path, const PiecewiseLinearLaw& law,
                     CostKind source_kind) {
  nlohmann::json j = {{"threshold_mm_s", law.threshold * 1000.0},
                      {"k_p1", law.k_p1},
                      {"k_d1", law.k_d1},
                      {"k_p2", law.k_p2},
                      {"k_d2", law.k_d2},
                      {"u1_max", law.u1_max},
                      {"source_cost_kind", cost_kind_name(source_kind)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write law file: " + path);
  out << j.dump(2) << "\n";
}

inline std::pair<PiecewiseLinearLaw, CostKind> load_law(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open law file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("law parse error: " + std::string(e.what()));
  }
  detail::require_keys(j, "law",
                       {"threshold_mm_s", "k_p1", "k_d1", "k_p2", "k_d2",
                        "u1_max", "source_cost_kind"});
  PiecewiseLinearLaw law{};
  law.threshold = detail::get<double>(j, "law", "threshold_mm_s") / 1000.0;
  law.k_p1 = detail::get<double>(j, "law", "k_p1");
  law.k_d1 = detail::get<double>(j, "law", "k_d1");
  law.k_p2 = detail::get<double>(j, "law", "k_p2");
  law.k_d2 = detail::get<double>(j, "law", "k_d2");
  law.u1_max = detail::get<double>(j, "law", "u1_max");
  return {law, cost_kind_from_name(detail::get<std::string>(j, "law", "source_cost_kind"))};
}

// -------------------------------------------------------------- snapshot

// Binary solve snapshot: "HCDP" magic, u32 format version, cost kind, grid
// spec and bounds, then row-major little-endian 64-bit floats.
inline constexpr char kSnapshotMagic[4] = {'H', 'C', 'D', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct Snapshot {
  GridSpec grid;
  CostKind kind;
  double u1_max;
  double v_gate;
  ValueTable value;
  PolicyTable policy;
};

namespace detail {
template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
void take(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace detail

inline void save_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write snapshot: " + path);
  out.write(kSnapshotMagic, 4);
  detail::put(out, kSnapshotVersion);
  detail::put(out, std::uint8_t(s.kind));
  detail::put(out, std::int32_t(s.grid.n_x));
  detail::put(out, std::int32_t(s.grid.n_v));
  detail::put(out, std::int32_t(s.grid.n_u1));
  detail::put(out, s.grid.dt);
  detail::put(out, s.grid.x_min);
  detail::put(out, s.grid.x_max);
  detail::put(out, s.grid.v_min);
  detail::put(out, s.grid.v_max);
  detail::put(out, s.u1_max);
  detail::put(out, s.v_gate);
  const std::size_t n = s.grid.cells();
  out.write(reinterpret_cast<const char*>(s.value.values.data()), n * sizeof(double));
  out.write(reinterpret_cast<const char*>(s.value.feasible.data()), n);
  out.write(reinterpret_cast<const char*>(s.policy.u1_star.data()), n * sizeof(double));
  out.write(reinterpret_cast<const char*>(s.policy.u2_star.data()), n);
  if (!out) throw IoError("snapshot write failed: " + path);
}

inline Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kSnapshotMagic, 4) != 0)
    throw IoError("not a HCDP snapshot: " + path);
  std::uint32_t version = 0;
  detail::take(in, version);
  if (version != kSnapshotVersion)
    throw IoError("unsupported snapshot version in " + path);
  Snapshot s;
  std::uint8_t kind = 0;
  detail::take(in, kind);
  s.kind = CostKind(kind);
  std::int32_t nx, nv, nu1;
  detail::take(in, nx);
  detail::take(in, nv);
  detail::take(in, nu1);
  s.grid.n_x = nx;
  s.grid.n_v = nv;
  s.grid.n_u1 = nu1;
  detail::take(in, s.grid.dt);
  detail::take(in, s.grid.x_min);
  detail::take(in, s.grid.x_max);
  detail::take(in, s.grid.v_min);
  detail::take(in, s.grid.v_max);
  detail::take(in, s.u1_max);
  detail::take(in, s.v_gate);
  s.grid.validate();
  const std::size_t n = s.grid.cells();
  s.value.grid = s.grid;
  s.policy.grid = s.grid;
  s.value.values.resize(n);
  s.value.feasible.resize(n);
  s.policy.u1_star.resize(n);
  s.policy.u2_star.resize(n);
  in.read(reinterpret_cast<char*>(s.value.values.data()), n * sizeof(double));
  in.read(reinterpret_cast<char*>(s.value.feasible.data()), n);
  in.read(reinterpret_cast<char*>(s.policy.u1_star.data()), n * sizeof(double));
  in.read(reinterpret_cast<char*>(s.policy.u2_star.data()), n);
  if (!in) throw IoError("snapshot truncated: " + path);
  s.policy.feasible = s.value.feasible;
  return s;
}

// ------------------------------------------------------------------- csv

// One row per cell: i, j, x, v, feasible, J, u1, u2. Interchange format for
// plotting the cost-to-go and policy maps.
inline void write_table_csv(const std::string& path, const ValueTable& value,
                            const PolicyTable& policy) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out << "i,j,x,v,feasible,J,u1,u2\n";
  out << std::setprecision(17);
  const GridSpec& g = value.grid;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      const std::size_t c = g.idx(i, j);
      out << i << ',' << j << ',' << g.x_at(i) << ',' << g.v_at(j) << ','
          << int(value.feasible[c]) << ',' << value.values[c] << ','
          << policy.u1_star[c] << ',' << int(policy.u2_star[c]) << '\n';
    }
  if (!out) throw IoError("csv write failed: " + path);
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out << "t,x,v,u1,u2,stage_cost,energy,in_bounds\n";
  out << std::setprecision(17);
  for (const auto& r : traj.records)
    out << r.t << ',' << r.x << ',' << r.v << ',' << r.u1 << ','
        << mode_index(r.u2) << ',' << r.stage_cost << ',' << r.energy << ','
        << int(r.in_bounds) << '\n';
  if (!out) throw IoError("csv write failed: " + path);
}

inline void write_phase_csv(const std::string& path,
                            const std::vector<PhaseSample>& field) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out << "x,v,vdot_natural,vdot_closed,u1,u2\n";
  out << std::setprecision(17);
  for (const auto& p : field)
    out << p.x << ',' << p.v << ',' << p.vdot_natural << ',' << p.vdot_closed
        << ',' << p.u1 << ',' << mode_index(p.u2) << '\n';
  if (!out) throw IoError("csv write failed: " + path);
}

}  // namespace hcdp
