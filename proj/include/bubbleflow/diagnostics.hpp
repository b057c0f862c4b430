#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "barriers.hpp"
#include "evolver.hpp"

namespace bubbleflow {

// ---------------------------------------------------------------------------
// energy

namespace detail {

inline constexpr std::array<double, 5> gauss_x = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                                  0.9061798459386640};
inline constexpr std::array<double, 5> gauss_w = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                  0.4786286704993665, 0.2369268850561891};

/// Lagrange basis values and derivatives at x for up to four nodes.
inline void lagrange(const double* xs, int m, double x, double* l, double* dl) {
  for (int j = 0; j < m; ++j) {
    double v = 1, d = 0;
    for (int k = 0; k < m; ++k) {
      if (k == j) continue;
      const double den = xs[j] - xs[k];
      d = d * (x - xs[k]) / den + v / den;
      v *= (x - xs[k]) / den;
    }
    l[j] = v;
    dl[j] = d;
  }
}

}  // namespace detail

/**
 * Integral of (phi_r^2 + sin^2 phi / r^2) r dr over [r_1, r_2] (both nodes): per cell, a cubic
 * through four nodes of the interval and five Gauss points. Values are handled as offsets from
 * a base reduced modulo pi, so E(phi + pi) == E(phi) bit for bit.
 */
inline double energy_between(const AngleProfile& p, std::size_t i0, std::size_t i1) {
  if (!(i0 < i1 && i1 <= p.g().N())) throw Error("energy interval must satisfy r1 < r2 within the grid");
  const auto& r = p.g().r;
  const int m = static_cast<int>(std::min<std::size_t>(4, i1 - i0 + 1));
  double E = 0;
  for (std::size_t i = i0; i < i1; ++i) {
    std::size_t j0 = i > i0 ? i - 1 : i0;
    j0 = std::min(j0, i1 + 1 - static_cast<std::size_t>(m));
    double xs[4], dy[4];
    for (int k = 0; k < m; ++k) {
      xs[k] = r[j0 + k];
      dy[k] = p.phi[j0 + k] - p.phi[i];
    }
    const double base = std::remainder(p.phi[i], pi);
    const double a = r[i], h = r[i + 1] - r[i];
    double cell = 0;
    for (int q = 0; q < 5; ++q) {
      const double x = a + 0.5 * h * (1 + detail::gauss_x[static_cast<std::size_t>(q)]);
      double l[4], dl[4];
      detail::lagrange(xs, m, x, l, dl);
      double v = 0, d = 0;
      for (int k = 0; k < m; ++k) {
        v += dy[k] * l[k];
        d += dy[k] * dl[k];
      }
      const double s = std::sin(base + v);
      cell += detail::gauss_w[static_cast<std::size_t>(q)] * (d * d * x + s * s / x);
    }
    E += 0.5 * h * cell;
  }
  return E;
}

inline double energy(const AngleProfile& p, double r1, double r2) {
  if (!(0 <= r1 && r1 < r2 && r2 <= 1)) throw Error("energy needs 0 <= r1 < r2 <= 1");
  return energy_between(p, p.g().node_index(r1), p.g().node_index(r2));
}

inline double energy(const AngleProfile& p) { return energy_between(p, 0, p.g().N()); }

/// 2(1 - cos phi(r_2)); valid while |phi(r_2)| < pi.
inline double energy_lower_bound(const AngleProfile& p, double r2) {
  const double v = p.phi[p.g().node_index(r2)];
  if (!(std::abs(v) < pi)) throw Error("energy lower bound needs |phi(r2)| < pi");
  return 2 * (1 - std::cos(v));
}

// ---------------------------------------------------------------------------
// energy traces

struct EnergySample {
  double t = 0;
  double E_total = 0;
  std::vector<double> E_probe;  // E_{0, probe_k}
  double r_half = 1;
  double chi = 0;
  double dissipation = 0;       // cumulative sum of dt * |phi_t|^2 in the r-weighted norm
  double inner_min = 0;         // min of phi over interior nodes up to the first probe
};

struct EnergyTrace {
  std::vector<double> probe_r;          // probe radii (grid nodes)
  std::vector<std::size_t> probe_idx;
  std::vector<EnergySample> samples;
  std::vector<double> event_times;

  EnergyTrace() = default;
  /// Probes snap to the first node at or beyond each requested radius.
  EnergyTrace(const RadialGrid& g, const std::vector<double>& probes) {
    for (double x : probes) {
      const std::size_t i = std::max<std::size_t>(1, g.first_node_at_least(x));
      probe_idx.push_back(i);
      probe_r.push_back(g.r[i]);
    }
  }

  EnergySample measure(const AngleProfile& p, double dissipation) const {
    EnergySample s;
    s.t = p.t;
    s.E_total = energy(p);
    for (std::size_t i : probe_idx) s.E_probe.push_back(energy_between(p, 0, i));
    s.r_half = half_angle_radius(p);
    s.chi = p.chi;
    s.dissipation = dissipation;
    s.inner_min = std::numeric_limits<double>::infinity();
    const std::size_t lim = probe_idx.empty() ? p.g().N() - 1 : probe_idx.front();
    for (std::size_t i = 1; i <= lim && i < p.g().N(); ++i) s.inner_min = std::min(s.inner_min, p.phi[i]);
    return s;
  }

  /// Appends a sample; a sample at the current last time replaces it unless the axis value changed.
  void record(const AngleProfile& p) {
    const double diss = samples.empty() ? 0.0 : samples.back().dissipation;
    push(measure(p, diss));
  }

  void record_step(const AngleProfile& prev, const AngleProfile& next) {
    const double dt = next.t - prev.t;
    double inc = 0;
    if (dt > 0) {
      const auto& g = next.g();
      for (std::size_t i = 1; i < g.N(); ++i) {
        const double v = (next.phi[i] - prev.phi[i]) / dt;
        inc += g.w[i] * v * v;
      }
      inc *= dt;
    }
    const double diss = (samples.empty() ? 0.0 : samples.back().dissipation) + inc;
    push(measure(next, diss));
  }

  void push(EnergySample s) {
    if (!samples.empty()) {
      const auto& b = samples.back();
      if (s.t < b.t) throw Error("energy samples must be time ordered");
      if (s.t == b.t && s.chi == b.chi) {
        samples.back() = std::move(s);
        return;
      }
    }
    samples.push_back(std::move(s));
  }

  StepObserver observer() {
    return [this](const AngleProfile& a, const AngleProfile& b) { record_step(a, b); };
  }
};

// ---------------------------------------------------------------------------
// drop across the blowup time and jump at reinsertion

struct DropEstimate {
  std::vector<double> probe_r;
  std::vector<double> drop;   // per probe radius
  double extrapolated = 0;    // linear extrapolation in the probe radius to 0
  double t_pre = 0, t_post = 0;
};

/**
 * E_{0,r}(pre) - E_{0,r}(post) at each probe radius, with pre the last chi=0 sample at or before t1
 * and post the first chi=pi sample after t1 whose inner minimum exceeds pi - gap (the grid remnant
 * of the collapsed core has relaxed).
 */
inline DropEstimate energy_drop(const EnergyTrace& tr, double t1, double gap = 1e-4) {
  const EnergySample* pre = nullptr;
  const EnergySample* post = nullptr;
  for (const auto& s : tr.samples) {
    if (s.t <= t1 && s.chi == 0.0) pre = &s;
    if (s.t >= t1 && s.chi == pi && s.inner_min > pi - gap) {
      post = &s;
      break;
    }
  }
  if (!pre || !post) throw Error("energy trace does not bracket t1");
  DropEstimate d;
  d.probe_r = tr.probe_r;
  d.t_pre = pre->t;
  d.t_post = post->t;
  for (std::size_t k = 0; k < tr.probe_r.size(); ++k) d.drop.push_back(pre->E_probe[k] - post->E_probe[k]);
  if (d.drop.size() >= 2) {
    const double r0 = d.probe_r[0], r1 = d.probe_r[1];
    d.extrapolated = d.drop[1] + (d.drop[1] - d.drop[0]) * r1 / (r0 - r1);
  } else if (!d.drop.empty()) {
    d.extrapolated = d.drop[0];
  }
  return d;
}

/// Energy right after the reinsertion at tau minus the base energy there.
inline double energy_jump(const EnergyTrace& tr, double tau, double base_energy) {
  for (const auto& s : tr.samples)
    if (s.t == tau && s.chi == 0.0) return s.E_total - base_energy;
  throw Error("energy trace does not start at tau");
}

// ---------------------------------------------------------------------------
// Gronwall check on event-free segments

/// e^{T-s} E(s) - E(T) between two samples; throws if an event lies in (s, T].
inline double gronwall_check(const EnergyTrace& tr, double s, double T) {
  if (!(s < T)) throw Error("gronwall interval needs s < T");
  for (double te : tr.event_times)
    if (te > s && te <= T) throw Error("gronwall interval contains an event");
  const EnergySample *a = nullptr, *b = nullptr;
  for (const auto& x : tr.samples) {
    if (x.t == s && !a) a = &x;
    if (x.t == T) b = &x;
  }
  if (!a || !b) throw Error("gronwall endpoints are not trace samples");
  return std::exp(T - s) * a->E_total - b->E_total;
}

/// Worst margin over all sample pairs s < T inside each event-free segment (maximal runs of constant chi).
inline double gronwall_worst(const EnergyTrace& tr) {
  double worst = std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();  // min of e^{-s} E(s) so far in the segment
  for (std::size_t k = 0; k < tr.samples.size(); ++k) {
    const auto& x = tr.samples[k];
    if (k == 0 || x.chi != tr.samples[k - 1].chi) best = std::numeric_limits<double>::infinity();
    else worst = std::min(worst, std::exp(x.t) * best - x.E_total);
    best = std::min(best, std::exp(-x.t) * x.E_total);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// ordering against barriers

enum class Side { below, above };  // the barrier lies below / above the trajectory

struct OrderingOptions {
  double r_max = 1.0;      // comparison domain (0, r_max]
  double t_offset = 0.0;   // barrier time = snapshot time - t_offset
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  double tol = 0.0;        // allowed violation on the lateral edges
};

struct OrderingReport {
  double violation = -std::numeric_limits<double>::infinity();  // max signed violation
  double r = 0, t = 0;
  std::size_t snapshots = 0;
};

/// Max over snapshots and nodes of (phi - g) for a barrier above, or (g - phi) for one below.
inline OrderingReport ordering_report(const Trajectory& traj, const BarrierSpec& b, Side side,
                                      const OrderingOptions& o = {}) {
  OrderingReport rep;
  const double sgn = side == Side::above ? 1.0 : -1.0;
  for (const auto& p : traj.snapshots) {
    if (p.t < o.t_lo || p.t > o.t_hi) continue;
    const double tb = p.t - o.t_offset;
    if (tb < 0 || tb > b.t_max()) continue;
    const auto& r = p.g().r;
    std::size_t last = 0;
    while (last + 1 < r.size() && r[last + 1] <= o.r_max * (1 + 1e-12)) ++last;
    // lateral edges of the comparison domain
    const double v0 = sgn * (p.phi[0] - barrier_value(b, 0.0, tb));
    if (v0 > o.tol) throw Error("ordering: boundary incompatible on the edge r = 0 at t = " + std::to_string(p.t));
    const double v1 = sgn * (p.phi[last] - barrier_value(b, r[last], tb));
    if (v1 > o.tol)
      throw Error("ordering: boundary incompatible on the edge r = " + std::to_string(r[last]) + " at t = " + std::to_string(p.t));
    ++rep.snapshots;
    for (std::size_t i = 1; i < last; ++i) {
      const double v = sgn * (p.phi[i] - barrier_value(b, r[i], tb));
      if (v > rep.violation) {
        rep.violation = v;
        rep.r = r[i];
        rep.t = p.t;
      }
    }
  }
  if (rep.snapshots == 0) throw Error("ordering: no snapshot inside the barrier's time domain");
  return rep;
}

/// Tolerance C h^2 with h the largest grid spacing.
inline double comparison_tolerance(const RadialGrid& g, double C) {
  const double h = g.max_spacing();
  return C * h * h;
}

}  // namespace bubbleflow
