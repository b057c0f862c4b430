#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "barriers.hpp"
#include "profile.hpp"
#include "radial_operator.hpp"

namespace bubbleflow {

// ---------------------------------------------------------------------------
// initial data

/**
 * phi0 = core(r) + (alpha - core(1/2)) sin(pi r) on [0,1/2] with core = 2 arctan(r/kappa)
 * (no core when kappa = 0), and beta + (alpha-beta) cos^2(pi(r-1/2)) on (1/2,1].
 */
struct InitialDataSpec {
  double alpha = 1.5 * pi;
  double beta = 0.5 * pi;
  double kappa = 0.0;

  void validate() const {
    if (!(alpha > pi && alpha < 2 * pi)) throw config_error("init.alpha must lie in (pi, 2 pi): phi0(1/2) = alpha");
    if (!(beta > 0 && beta < pi)) throw config_error("init.beta must lie in (0, pi)");
    if (!(kappa >= 0)) throw config_error("init.kappa must be >= 0");
  }

  double operator()(double r) const {
    if (r <= 0.5) {
      if (kappa == 0) return alpha * std::sin(pi * r);
      return 2 * std::atan(r / kappa) + (alpha - 2 * std::atan(0.5 / kappa)) * std::sin(pi * r);
    }
    const double c = std::cos(pi * (r - 0.5));
    return beta + (alpha - beta) * c * c;
  }
};

struct InitialReport {
  bool monotone_inner = true;   // increasing on (0,1/2)
  bool monotone_outer = true;   // decreasing on (1/2,1)
  bool axis_regular = true;     // phi0/r bounded near the axis
  std::optional<bool> dominates_subsolution;
  double domination_margin = 0;  // min over r <= 1/2 of phi0 - Phi(.,0)
};

inline AngleProfile initial_profile(const InitialDataSpec& s, GridPtr g, InitialReport* report = nullptr,
                                    const BarrierSpec* sub = nullptr) {
  s.validate();
  auto p = sample_profile(g, s);
  p.phi.front() = 0.0;
  p.phi.back() = s.beta;
  p.chi = 0.0;
  p.beta = s.beta;
  if (report) {
    InitialReport rep;
    const auto& r = g->r;
    double max_slope = 0;
    for (std::size_t i = 1; i < r.size(); ++i) {
      if (r[i] <= 0.5 && p.phi[i] <= p.phi[i - 1]) rep.monotone_inner = false;
      if (r[i - 1] >= 0.5 && p.phi[i] >= p.phi[i - 1]) rep.monotone_outer = false;
      if (r[i] <= 0.01) max_slope = std::max(max_slope, std::abs(p.phi[i]) / r[i]);
    }
    rep.axis_regular = std::isfinite(max_slope) && max_slope < 1e12;
    if (sub) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t i = 1; i < r.size() && r[i] <= 0.5; ++i) m = std::min(m, p.phi[i] - barrier_value(*sub, r[i], 0.0));
      rep.domination_margin = m;
      rep.dominates_subsolution = m >= 0;
    }
    *report = rep;
  }
  return p;
}

// ---------------------------------------------------------------------------
// solver configuration, events, trajectories

struct SolverConfig {
  double dt0 = 1e-8;
  double dt_max = 1e-3;
  double dt_min = 1e-12;
  double max_change = 0.05;    // per-step sup-norm change threshold (radians)
  double theta = 1.0;          // implicit weight
  double rho_blow = 1e-6;      // half-angle radius threshold
  double blow_window = 4.0;    // near-pi test on r < blow_window * rho_blow
  double near_pi_gap = 0.1;
  double newton_tol = 1e-10;
  int newton_maxit = 30;
  double cadence = 0.01;       // snapshot interval

  void validate(const RadialGrid& g) const {
    if (!(dt0 > 0 && dt_max >= dt0 && dt_min > 0 && dt_min <= dt0)) throw config_error("solver: need 0 < dt_min <= dt0 <= dt_max");
    if (!(theta >= 0.5 && theta <= 1)) throw config_error("solver.theta must lie in [1/2, 1]");
    if (!(rho_blow >= 3 * g.axis_spacing())) throw config_error("solver.rho_blow must be at least 3 axis spacings");
    if (!(blow_window >= 1)) throw config_error("solver.blow_window must be >= 1");
    if (!(max_change > 0)) throw config_error("solver.max_change must be positive");
    if (!(cadence > 0)) throw config_error("solver.cadence must be positive");
  }
};

struct Event {
  enum Kind { blowup, boundary_jump, reinsertion };
  Kind kind = blowup;
  double t = 0;
  double chi_old = 0, chi_new = 0;
  double r_n = 0;
  double dt = 0;  // width of the bracketing step for a detected blowup
};

inline const char* event_name(Event::Kind k) {
  switch (k) {
    case Event::blowup: return "blowup";
    case Event::boundary_jump: return "boundary_jump";
    case Event::reinsertion: return "reinsertion";
  }
  return "?";
}

struct Trajectory {
  std::vector<AngleProfile> snapshots;
  std::vector<Event> events;

  void add_snapshot(const AngleProfile& p) {
    if (!snapshots.empty() && !(p.t > snapshots.back().t)) throw Error("snapshot times must increase");
    snapshots.push_back(p);
  }
  void add_event(const Event& e) {
    if (!events.empty() && e.t < events.back().t) throw Error("events must be time ordered");
    events.push_back(e);
  }
  void append(const Trajectory& o) {
    for (const auto& s : o.snapshots) add_snapshot(s);
    for (const auto& e : o.events) add_event(e);
  }
};

/// Thrown when the step size underflows; carries what was computed so far.
class SingularityError : public Error {
public:
  SingularityError(const std::string& what, Trajectory partial) : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

private:
  Trajectory partial_;
};

// ---------------------------------------------------------------------------
// time stepping

/// Extra source term f(r,t) added to the right-hand side (manufactured solutions).
using Forcing = std::function<double(double, double)>;

namespace detail {

/// Solves a tridiagonal system in place; returns false on a vanishing pivot.
inline bool thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c, std::vector<double>& d) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (!(std::abs(b[i - 1]) > 0)) return false;
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    d[i] -= m * d[i - 1];
  }
  if (!(std::abs(b[n - 1]) > 0)) return false;
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
  for (double v : d)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace detail

/**
 * One theta-weighted step: diffusion and upwind drift in the implicit matrix, the sine term
 * solved by Newton iteration on the same tridiagonal structure. Returns nullopt when Newton fails.
 */
inline std::optional<AngleProfile> step(const AngleProfile& p, double dt, double chi, const SolverConfig& cfg,
                                        const Stencil& st, const Forcing& forcing = nullptr) {
  const auto& g = p.g();
  const std::size_t N = g.N();
  const double th = cfg.theta;
  std::vector<double> explicit_part(N - 1, 0.0);
  for (std::size_t i = 1; i < N; ++i) {
    double e = p.phi[i] / dt;
    if (th < 1) e += (1 - th) * st.apply(i, p.phi[i - 1], p.phi[i], p.phi[i + 1]);
    if (forcing) e += th * forcing(g.r[i], p.t + dt) + (1 - th) * forcing(g.r[i], p.t);
    explicit_part[i - 1] = e;
  }
  AngleProfile x = p;
  x.t = p.t + dt;
  x.set_chi(chi);
  std::vector<double> a(N - 1), b(N - 1), c(N - 1), d(N - 1);
  for (int it = 0; it < cfg.newton_maxit; ++it) {
    for (std::size_t i = 1; i < N; ++i) {
      const std::size_t k = i - 1;
      const double F = st.apply(i, x.phi[i - 1], x.phi[i], x.phi[i + 1]);
      d[k] = -(x.phi[i] / dt - th * F - explicit_part[k]);
      b[k] = 1 / dt - th * (st.dg[k] - cos2(x.phi[i]) * st.inv_r2[k]);
      a[k] = -th * st.lo[k];
      c[k] = -th * st.up[k];
    }
    if (!detail::thomas(a, b, c, d)) return std::nullopt;
    double m = 0;
    for (double v : d) m = std::max(m, std::abs(v));
    const double scale = m > 1.0 ? 1.0 / m : 1.0;
    for (std::size_t i = 1; i < N; ++i) x.phi[i] += scale * d[i - 1];
    if (m < cfg.newton_tol) return x;
  }
  return std::nullopt;
}

inline std::optional<AngleProfile> step(const AngleProfile& p, double dt, double chi, const SolverConfig& cfg,
                                        const Forcing& forcing = nullptr) {
  Stencil st(p.g(), DriftScheme::upwind);
  return step(p, dt, chi, cfg, st, forcing);
}

// ---------------------------------------------------------------------------
// blowup detection and continuation

inline std::optional<Event> detect_blowup(const AngleProfile& p, const SolverConfig& cfg) {
  if (p.chi != 0.0) return std::nullopt;
  const double rh = half_angle_radius(p);
  if (!(rh < cfg.rho_blow)) return std::nullopt;
  const auto& r = p.g().r;
  for (std::size_t i = 1; i < r.size() && r[i] < cfg.blow_window * cfg.rho_blow; ++i)
    if (p.phi[i] > pi - cfg.near_pi_gap) return Event{Event::blowup, p.t, 0.0, 0.0, 0.0, 0.0};
  return std::nullopt;
}

/// Switches the axis value to pi after a detected blowup and records the jump.
inline AngleProfile continue_past_blowup(Trajectory& traj, const AngleProfile& last, const SolverConfig& cfg) {
  if (traj.events.empty() || traj.events.back().kind != Event::blowup)
    throw Error("continuation requires a blowup as the last event");
  const double t1 = traj.events.back().t;
  const auto& r = last.g().r;
  bool near_pi = false;
  for (std::size_t i = 1; i < r.size() && r[i] < cfg.blow_window * cfg.rho_blow; ++i)
    near_pi = near_pi || last.phi[i] > pi - cfg.near_pi_gap;
  if (!near_pi) throw Error("blowup limit not pi; cannot continue");
  AngleProfile out = last;
  out.set_chi(pi);
  traj.add_event(Event{Event::boundary_jump, t1, 0.0, pi, 0.0, 0.0});
  return out;
}

// ---------------------------------------------------------------------------
// driver

/// Called after every accepted step with the previous and new profile.
using StepObserver = std::function<void(const AngleProfile&, const AngleProfile&)>;

struct RunResult {
  Trajectory traj;
  AngleProfile last;
  std::optional<Event> blowup;
  long steps = 0;
  long rejected = 0;
};

struct RunOptions {
  bool detect = true;
  double cadence_origin = 0.0;   // snapshots at origin + k * cadence
  bool snapshot_start = true;
  Forcing forcing = nullptr;
  StepObserver observer = nullptr;
};

/// Adaptive integration with a fixed axis value until t_end or a detected blowup.
inline RunResult run_until(const AngleProfile& start, double chi, double t_end, const SolverConfig& cfg,
                           const RunOptions& opt = {}) {
  const auto& g = start.g();
  cfg.validate(g);
  if (!(t_end > start.t)) throw Error("run_until needs t_end after the start time");
  Stencil st(g, DriftScheme::upwind);
  RunResult res;
  AngleProfile cur = start;
  cur.set_chi(chi);
  if (opt.snapshot_start) res.traj.add_snapshot(cur);

  auto snap_index_after = [&](double t) {
    return std::floor((t - opt.cadence_origin) / cfg.cadence * (1 + 1e-12) + 1e-9) + 1;
  };
  double k_next = snap_index_after(cur.t);
  double dt = cfg.dt0;
  while (cur.t < t_end) {
    const double t_snap = std::min(t_end, opt.cadence_origin + k_next * cfg.cadence);
    double h = dt;
    bool lands = false;
    if (cur.t + h >= t_snap * (1 - 1e-14)) {
      h = t_snap - cur.t;
      lands = true;
    }
    auto nx = step(cur, h, chi, cfg, st, opt.forcing);
    double change = 0;
    if (nx)
      for (std::size_t i = 1; i < g.N(); ++i) change = std::max(change, std::abs(nx->phi[i] - cur.phi[i]));
    const bool at_floor = h <= cfg.dt_min;
    if (!nx || (change > cfg.max_change && !at_floor)) {
      ++res.rejected;
      if (at_floor) {
        res.last = cur;
        throw SingularityError("unresolved singularity at t = " + std::to_string(cur.t) + ": step size below " +
                                   std::to_string(cfg.dt_min),
                               res.traj);
      }
      dt = std::max(0.5 * h, cfg.dt_min);
      continue;
    }
    if (lands) nx->t = t_snap;
    const AngleProfile prev = std::move(cur);
    cur = std::move(*nx);
    ++res.steps;
    if (opt.observer) opt.observer(prev, cur);
    if (change < 0.5 * cfg.max_change) dt = std::min(1.2 * std::max(dt, h), cfg.dt_max);
    else if (!lands) dt = h;
    if (lands) {
      res.traj.add_snapshot(cur);
      k_next = snap_index_after(cur.t);
    }
    if (opt.detect) {
      if (auto ev = detect_blowup(cur, cfg)) {
        ev->dt = h;
        if (!lands) res.traj.add_snapshot(cur);
        res.traj.add_event(*ev);
        res.blowup = ev;
        break;
      }
    }
  }
  res.last = cur;
  return res;
}

}  // namespace bubbleflow
