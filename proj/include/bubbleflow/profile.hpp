#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grid.hpp"

namespace bubbleflow {

/// Angle field on a grid at one time; phi[0] == chi and phi[N] == beta.
struct AngleProfile {
  GridPtr grid;
  std::vector<double> phi;
  double t = 0.0;
  double chi = 0.0;
  double beta = 0.0;

  AngleProfile() = default;
  AngleProfile(GridPtr g, std::vector<double> values, double time)
      : grid(std::move(g)), phi(std::move(values)), t(time) {
    if (!grid || phi.size() != grid->size()) throw Error("profile size does not match grid");
    chi = phi.front();
    beta = phi.back();
  }

  const RadialGrid& g() const { return *grid; }
  std::size_t size() const { return phi.size(); }
  double operator[](std::size_t i) const { return phi[i]; }

  void set_chi(double c) {
    chi = c;
    phi.front() = c;
  }

  void validate() const {
    if (phi.front() != chi || phi.back() != beta) throw Error("profile boundary values out of sync");
    for (std::size_t i = 0; i < phi.size(); ++i)
      if (!std::isfinite(phi[i])) throw Error("non-finite angle at node " + std::to_string(i));
  }

  /// Piecewise-linear value at radius x.
  double at(double x) const {
    const auto& r = grid->r;
    if (x <= 0) return phi.front();
    if (x >= 1) return phi.back();
    std::size_t i = grid->cell_of(x);
    double s = (x - r[i]) / (r[i + 1] - r[i]);
    return phi[i] + s * (phi[i + 1] - phi[i]);
  }
};

template <class F>
AngleProfile sample_profile(GridPtr g, F&& f, double t = 0.0) {
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g->r[i]);
  return AngleProfile(std::move(g), std::move(v), t);
}

/// Smallest grid radius where phi reaches pi/2 (1 if never).
inline double half_angle_radius(const AngleProfile& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.phi[i] >= pi / 2) return p.g().r[i];
  return 1.0;
}

}  // namespace bubbleflow
