#pragma once

#include <cmath>
#include <vector>

#include "profile.hpp"

namespace bubbleflow {

/// sin(2x) and cos(2x) after reducing x modulo pi, so that shifting by pi is exact.
inline double sin2(double x) { return std::sin(2 * std::remainder(x, pi)); }
inline double cos2(double x) { return std::cos(2 * std::remainder(x, pi)); }

enum class DriftScheme { upwind, central };

/**
 * Tridiagonal coefficients of the linear part of the operator at interior nodes:
 * (1/r)(r phi_r)_r in conservative form plus the drift -r phi_r.
 * Row i-1 of each array belongs to node i.
 */
struct Stencil {
  std::vector<double> lo, dg, up, inv_r2;

  Stencil(const RadialGrid& g, DriftScheme drift) {
    const std::size_t N = g.N();
    lo.resize(N - 1);
    dg.resize(N - 1);
    up.resize(N - 1);
    inv_r2.resize(N - 1);
    for (std::size_t i = 1; i < N; ++i) {
      const double rm = g.r[i - 1], ri = g.r[i], rp = g.r[i + 1];
      const double hm = ri - rm, hp = rp - ri;
      const double den = ri * 0.5 * (hm + hp);
      const double cm = 0.5 * (rm + ri) / hm / den;
      const double cp = 0.5 * (ri + rp) / hp / den;
      double l = cm, d = -(cm + cp), u = cp;
      if (drift == DriftScheme::upwind) {
        l += ri / hm;
        d -= ri / hm;
      } else {
        const double a = ri * hp / (hm * (hm + hp)), c = ri * hm / (hp * (hm + hp));
        l += a;
        d -= a - c;
        u -= c;
      }
      lo[i - 1] = l;
      dg[i - 1] = d;
      up[i - 1] = u;
      inv_r2[i - 1] = 1.0 / (ri * ri);
    }
  }

  /// Operator value at interior node i; rows sum to zero so dg enters only through the Jacobian.
  double apply(std::size_t i, double pm, double p0, double pp) const {
    const std::size_t k = i - 1;
    return lo[k] * (pm - p0) + up[k] * (pp - p0) - 0.5 * sin2(p0) * inv_r2[k];
  }
};

/// Nodes this close to the axis use the series form of the singular pair.
inline constexpr double series_radius = 1e-6;

/**
 * Per-node values of phi_rr + phi_r/r - sin(2 phi)/(2 r^2) - r phi_r.
 * Second order on smoothly graded grids; the axis value and the first three nodes
 * below series_radius use the expansion phi = chi + a r.
 */
inline std::vector<double> radial_operator(const AngleProfile& p, DriftScheme drift = DriftScheme::central) {
  p.validate();
  const auto& g = p.g();
  const std::size_t N = g.N();
  Stencil st(g, drift);
  std::vector<double> out(N + 1, 0.0);
  for (std::size_t i = 1; i < N; ++i) {
    if (i <= 3 && g.r[i] < series_radius) {
      // phi_r/r - sin(2phi)/(2r^2) = (2/3) a^3 r + O(r^3); the linear term carries no phi_rr
      const double a = (p.phi[i] - p.chi) / g.r[i];
      out[i] = (2.0 / 3.0) * a * a * a * g.r[i] - g.r[i] * a;
      continue;
    }
    // rows sum to zero, so a shift by pi is exact whenever the shifted values are
    out[i] = st.apply(i, p.phi[i - 1], p.phi[i], p.phi[i + 1]);
  }
  return out;
}

}  // namespace bubbleflow
