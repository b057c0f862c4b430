#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace bubbleflow {

inline constexpr double pi = std::numbers::pi;

enum class GridKind { power, geometric };

/// Nodes r_0 = 0 < r_1 < ... < r_N = 1 with trapezoid weights for the measure r dr.
struct RadialGrid {
  GridKind kind = GridKind::power;
  double q = 1.0;       // power grading exponent
  double r_min = 0.0;   // first interior node of a geometric grid
  std::vector<double> r;
  std::vector<double> w;

  std::size_t N() const { return r.size() - 1; }
  std::size_t size() const { return r.size(); }
  double operator[](std::size_t i) const { return r[i]; }
  double spacing(std::size_t i) const { return r[i + 1] - r[i]; }
  double axis_spacing() const { return r[1]; }

  double max_spacing() const {
    double h = 0;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) h = std::max(h, spacing(i));
    return h;
  }

  /// Index of a node equal to x up to a relative 1e-12, or throws.
  std::size_t node_index(double x) const {
    auto it = std::lower_bound(r.begin(), r.end(), x * (1 - 1e-12) - 1e-300);
    if (it == r.end() || std::abs(*it - x) > 1e-12 * std::max(1.0, std::abs(x)) + 1e-300)
      throw Error("radius " + std::to_string(x) + " is not a grid node");
    return static_cast<std::size_t>(it - r.begin());
  }

  /// Smallest node index with r_i >= x.
  std::size_t first_node_at_least(double x) const {
    auto it = std::lower_bound(r.begin(), r.end(), x);
    if (it == r.end()) return N();
    return static_cast<std::size_t>(it - r.begin());
  }

  /// Index i with r_i <= x < r_{i+1} (clamped to a valid cell).
  std::size_t cell_of(double x) const {
    auto it = std::upper_bound(r.begin(), r.end(), x);
    std::size_t i = it == r.begin() ? 0 : static_cast<std::size_t>(it - r.begin()) - 1;
    return std::min(i, N() - 1);
  }
};

using GridPtr = std::shared_ptr<const RadialGrid>;

namespace detail {

inline void finish_grid(RadialGrid& g) {
  const std::size_t n = g.r.size();
  g.r.front() = 0.0;
  g.r.back() = 1.0;
  g.w.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = g.r[i + 1] - g.r[i];
    g.w[i] += 0.5 * h * g.r[i];
    g.w[i + 1] += 0.5 * h * g.r[i + 1];
  }
  // the r-weight vanishes on the axis; give it the exact share of the first cell
  const double h0 = g.r[1];
  g.w[0] = h0 * h0 / 6.0;
  g.w[1] += h0 * h0 / 3.0 - 0.5 * h0 * h0;
}

}  // namespace detail

/// r_i = (i/N)^q.
inline RadialGrid build_grid(int N, double q = 2.0) {
  if (N < 16) throw config_error("grid.N must be >= 16 (got " + std::to_string(N) + ")");
  if (!(q >= 1.0)) throw config_error("grid.q must be >= 1");
  RadialGrid g;
  g.kind = GridKind::power;
  g.q = q;
  g.r.resize(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) g.r[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i) / N, q);
  detail::finish_grid(g);
  g.r_min = g.r[1];
  return g;
}

/// r_0 = 0 and r_i = r_min^{1-(i-1)/(N-1)} for i >= 1: uniform in ln r away from the axis.
inline RadialGrid build_geometric_grid(int N, double r_min) {
  if (N < 16) throw config_error("grid.N must be >= 16 (got " + std::to_string(N) + ")");
  if (!(r_min > 0.0 && r_min < 1e-2)) throw config_error("grid.r_min must lie in (0, 1e-2)");
  RadialGrid g;
  g.kind = GridKind::geometric;
  g.r_min = r_min;
  g.r.resize(static_cast<std::size_t>(N) + 1);
  const double L = std::log(r_min);
  for (int i = 1; i <= N; ++i)
    g.r[static_cast<std::size_t>(i)] = std::exp(L * (1.0 - static_cast<double>(i - 1) / (N - 1)));
  detail::finish_grid(g);
  return g;
}

/// Integral of f(r) r dr over [0,1] by the grid weights.
inline double weighted_integral(const RadialGrid& g, std::span<const double> f) {
  if (f.size() != g.size()) throw Error("sample count does not match grid");
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw Error("non-finite sample at node " + std::to_string(i));
    s += g.w[i] * f[i];
  }
  return s;
}

template <class F>
double weighted_integral_of(const RadialGrid& g, F&& f) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.r[i]);
  return weighted_integral(g, v);
}

}  // namespace bubbleflow
