#pragma once

// Hybrid two-speed actuator model: lumped-parameter dynamics with a
// continuous torque input and a discrete gear-mode input, plus the stage
// costs used by the optimal-control solver. All quantities are SI
// (m, m/s, N·m); millimetre values from configs are converted at the
// interface layer.

#include <cmath>
#include <stdexcept>
#include <string>

namespace hcdp {

enum class Mode : int { One = 1, Two = 2 };

inline int mode_index(Mode m) { return static_cast<int>(m); }

inline Mode mode_from_int(int v) {
  if (v != 1 && v != 2) throw std::invalid_argument("mode must be 1 or 2");
  return static_cast<Mode>(v);
}

struct State {
  double x = 0.0;  // position (m)
  double v = 0.0;  // velocity (m/s)
};

struct ControlInput {
  double u1 = 0.0;       // motor torque (N·m)
  Mode u2 = Mode::One;   // gear mode
};

// Physical constants of the two-mode actuator. Defaults describe the
// documented illustrative configuration: 11.4 kg output mass, 20 mm lead
// ball screw, 4:1 and 72:1 reductions. Rotor inertias, motor dampings and
// output damping are illustrative placeholders (no published values exist
// for them); configs may override any field.
struct ActuatorParams {
  double m_o = 11.4;            // output mass (kg)
  double b_o = 5.0;             // output damping (N·s/m)
  double J_1 = 2.13e-5;         // rotor inertia, mode 1 (kg·m²)
  double J_2 = 1.04e-6;         // rotor inertia, mode 2 (kg·m²)
  double b_1 = 1.868e-4;        // motor damping, mode 1 (N·m·s/rad)
  double b_2 = 9.373e-6;        // motor damping, mode 2 (N·m·s/rad)
  double R_1 = 4.0;             // gear reduction, mode 1
  double R_2 = 72.0;            // gear reduction, mode 2
  double L_o = 0.020 / (2.0 * M_PI);  // screw transmission constant, lead/(2π) (m/rad)
  double u1_max = 0.02;         // torque bound (N·m)
  double v_gate = 0.020;        // mode-gate speed (m/s)
  double x_min = -0.150, x_max = 0.150;   // position bounds (m)
  double v_min = -0.500, v_max = 0.500;   // speed bounds (m/s)

  double gear_ratio(Mode m) const { return m == Mode::One ? R_1 : R_2; }
  double rotor_inertia(Mode m) const { return m == Mode::One ? J_1 : J_2; }
  double motor_damping(Mode m) const { return m == Mode::One ? b_1 : b_2; }

  // torque-to-force factor R_i/L_o (N per N·m)
  double force_factor(Mode m) const { return gear_ratio(m) / L_o; }

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("ActuatorParams: ") + what);
    };
    req(m_o > 0.0, "m_o must be positive");
    req(b_o >= 0.0 && b_1 >= 0.0 && b_2 >= 0.0, "dampings must be nonnegative");
    req(J_1 >= 0.0 && J_2 >= 0.0, "rotor inertias must be nonnegative");
    req(R_1 > 0.0 && R_2 > R_1, "need R_2 > R_1 > 0");
    req(L_o > 0.0, "L_o must be positive");
    req(u1_max > 0.0, "u1_max must be positive");
    req(v_gate > 0.0, "v_gate must be positive");
    req(x_min < 0.0 && 0.0 < x_max, "position bounds must straddle 0");
    req(v_min < 0.0 && 0.0 < v_max, "speed bounds must straddle 0");
  }

  bool in_bounds(const State& s) const {
    return s.x >= x_min && s.x <= x_max && s.v >= v_min && s.v <= v_max;
  }
};

struct ReflectedParams {
  double mass;     // m_r (kg)
  double damping;  // b_r (N·s/m)
};

// Motor-side inertia and damping mapped through the squared transmission
// ratio to equivalent output-side quantities.
inline ReflectedParams reflected_params(const ActuatorParams& p, Mode mode) {
  const double k = p.force_factor(mode);
  return {p.m_o + k * k * p.rotor_inertia(mode),
          p.b_o + k * k * p.motor_damping(mode)};
}

inline void check_torque(const ActuatorParams& p, double u1) {
  // small slack so a clamp to exactly ±u1_max never trips
  if (std::abs(u1) > p.u1_max * (1.0 + 1e-12))
    throw std::invalid_argument("torque command outside [-u1_max, u1_max]");
}

// ẍ = (1/m_r)(−b_r ẋ + (R_i/L_o) u1), i = active mode
inline double acceleration(const ActuatorParams& p, const State& s,
                           const ControlInput& u) {
  check_torque(p, u.u1);
  const ReflectedParams r = reflected_params(p, u.u2);
  return (-r.damping * s.v + p.force_factor(u.u2) * u.u1) / r.mass;
}

// One classical 4-stage explicit (RK4) step of the state equation with the
// input held constant. Per-mode dynamics are linear and non-stiff at the
// time scales used here, so a fixed step is accurate and deterministic.
inline State step(const ActuatorParams& p, const State& s,
                  const ControlInput& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  check_torque(p, u.u1);
  const ReflectedParams r = reflected_params(p, u.u2);
  const double force = p.force_factor(u.u2) * u.u1;
  auto vdot = [&](double v) { return (-r.damping * v + force) / r.mass; };

  const double k1v = vdot(s.v);
  const double k2v = vdot(s.v + 0.5 * dt * k1v);
  const double k3v = vdot(s.v + 0.5 * dt * k2v);
  const double k4v = vdot(s.v + dt * k3v);

  // position stages reuse the velocity stages of the same tableau
  const double k1x = s.v;
  const double k2x = s.v + 0.5 * dt * k1v;
  const double k3x = s.v + 0.5 * dt * k2v;
  const double k4x = s.v + dt * k3v;

  return {s.x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
          s.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

enum class CostKind { Quadratic, MinTime, MinEnergy };

inline const char* cost_kind_name(CostKind k) {
  switch (k) {
    case CostKind::Quadratic: return "quadratic";
    case CostKind::MinTime: return "min_time";
    case CostKind::MinEnergy: return "min_energy";
  }
  return "?";
}

inline CostKind cost_kind_from_name(const std::string& s) {
  if (s == "quadratic") return CostKind::Quadratic;
  if (s == "min_time") return CostKind::MinTime;
  if (s == "min_energy") return CostKind::MinEnergy;
  throw std::invalid_argument("unknown cost kind: " + s);
}

struct CostWeights {
  double w1 = 35.0;    // position weight (1/m²·s)
  double w2 = 800.0;   // velocity weight (s/m²)
  double w3 = 3000.0;  // torque weight (1/(N·m)²·s)
  CostKind kind = CostKind::Quadratic;

  void validate() const {
    if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0)
      throw std::invalid_argument("CostWeights: weights must be nonnegative");
    if (kind == CostKind::Quadratic && !(w1 > 0.0))
      throw std::invalid_argument("CostWeights: quadratic cost needs w1 > 0");
  }
};

// Stage cost rate g(x, u).
inline double stage_cost(const CostWeights& w, const State& s,
                         const ControlInput& u) {
  switch (w.kind) {
    case CostKind::Quadratic:
      return w.w1 * s.x * s.x + w.w2 * s.v * s.v + w.w3 * u.u1 * u.u1;
    case CostKind::MinTime:
      return 1.0;
    case CostKind::MinEnergy:
      return u.u1 * u.u1;
  }
  return 0.0;
}

}  // namespace hcdp
