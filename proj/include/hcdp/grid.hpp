#pragma once

// State-space grid used by the dynamic-programming solver: even rectangular
// discretization of (x, v) with bilinear interpolation of cell values.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hcdp/model.hpp"

namespace hcdp {

struct GridSpec {
  int n_x = 501;      // position resolution
  int n_v = 501;      // velocity resolution
  int n_u1 = 51;      // torque levels (odd, so u1 = 0 is representable)
  double dt = 0.02;   // backup time step (s)
  double x_min = -0.150, x_max = 0.150;
  double v_min = -0.500, v_max = 0.500;

  void validate() const {
    if (n_x < 2 || n_v < 2) throw std::invalid_argument("GridSpec: n_x, n_v must be >= 2");
    if (n_u1 < 2 || n_u1 % 2 == 0)
      throw std::invalid_argument("GridSpec: n_u1 must be >= 2 and odd");
    if (!(dt > 0.0)) throw std::invalid_argument("GridSpec: dt must be positive");
    if (!(x_min < x_max) || !(v_min < v_max))
      throw std::invalid_argument("GridSpec: empty state box");
  }

  static GridSpec from_params(const ActuatorParams& p, int nx, int nv, int nu1,
                              double dt) {
    GridSpec g;
    g.n_x = nx; g.n_v = nv; g.n_u1 = nu1; g.dt = dt;
    g.x_min = p.x_min; g.x_max = p.x_max;
    g.v_min = p.v_min; g.v_max = p.v_max;
    g.validate();
    return g;
  }

  double hx() const { return (x_max - x_min) / (n_x - 1); }
  double hv() const { return (v_max - v_min) / (n_v - 1); }
  double x_at(int i) const { return x_min + i * hx(); }
  double v_at(int j) const { return v_min + j * hv(); }

  // evenly spaced ladder on [-u1_max, u1_max]
  double torque_level(int k, double u1_max) const {
    return -u1_max + 2.0 * u1_max * k / (n_u1 - 1);
  }

  std::size_t cells() const { return std::size_t(n_x) * std::size_t(n_v); }
  std::size_t idx(int i, int j) const { return std::size_t(i) * n_v + j; }

  bool contains(const State& s) const {
    return s.x >= x_min && s.x <= x_max && s.v >= v_min && s.v <= v_max;
  }

  // Fractional grid coordinates of a state (fi in [0, n_x-1] when inside).
  double frac_i(double x) const { return (x - x_min) / hx(); }
  double frac_j(double v) const { return (v - v_min) / hv(); }

  int nearest_i(double x) const {
    int i = int(frac_i(x) + 0.5);
    return i < 0 ? 0 : (i >= n_x ? n_x - 1 : i);
  }
  int nearest_j(double v) const {
    int j = int(frac_j(v) + 0.5);
    return j < 0 ? 0 : (j >= n_v ? n_v - 1 : j);
  }
};

// Bilinear interpolation of a row-major n_x × n_v table at fractional
// coordinates (fi, fj). Caller guarantees 0 <= fi <= n_x-1, 0 <= fj <= n_v-1.
inline double bilinear(const std::vector<double>& tab, const GridSpec& g,
                       double fi, double fj) {
  int i0 = int(fi);
  int j0 = int(fj);
  if (i0 >= g.n_x - 1) i0 = g.n_x - 2;
  if (j0 >= g.n_v - 1) j0 = g.n_v - 2;
  const double wi = fi - i0;
  const double wj = fj - j0;
  const double* base = tab.data() + g.idx(i0, j0);
  const double v00 = base[0], v01 = base[1];
  const double v10 = base[g.n_v], v11 = base[g.n_v + 1];
  return (1.0 - wi) * ((1.0 - wj) * v00 + wj * v01) +
         wi * ((1.0 - wj) * v10 + wj * v11);
}

}  // namespace hcdp
