#pragma once

#include <algorithm>
#include <exception>
#include <limits>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "barriers.hpp"
#include "diagnostics.hpp"
#include "evolver.hpp"

namespace bubbleflow {

// ---------------------------------------------------------------------------
// t2

struct T2Options {
  double eps_cone = 0.1;
  double gamma = 1.05;     // the cap barrier uses l = eps_cone
  double min_span = 2.0;   // the trajectory must reach t1 + min_span
};

struct T2Result {
  double t2 = 0;
  std::optional<double> t_sigma;       // first snapshot below g(., 0)
  bool below_g = false;                // stays below g(., t - t_sigma) on [t_sigma, t_sigma + ln 3]
  double g_violation = 0;              // max of phi - g over that window
  double t2_from_g = 0;                // t_sigma + (gamma + ln 3)/2
  double cone_slope_from_g = 0;        // slope s with g(., (gamma+ln3)/2) <= pi - s r
};

inline bool below_cone(const AngleProfile& p, double eps) {
  const auto& r = p.g().r;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (p.phi[i] > pi - eps * r[i]) return false;
  return true;
}

/// First snapshot after t1 from which phi <= pi - eps r holds at every node and every later snapshot.
inline T2Result find_t2(const Trajectory& base, double t1, const T2Options& o = {}) {
  if (base.snapshots.empty() || base.snapshots.back().t < t1 + o.min_span)
    throw Error("find_t2 needs the base trajectory to reach t1 + " + std::to_string(o.min_span));
  std::vector<const AngleProfile*> after;
  for (const auto& s : base.snapshots)
    if (s.t > t1 && s.chi == pi) after.push_back(&s);
  std::size_t k = after.size();
  while (k > 0 && below_cone(*after[k - 1], o.eps_cone)) --k;
  if (k == after.size()) throw Error("t2 not reached; extend horizon");
  T2Result res;
  res.t2 = after[k]->t;

  BarrierSpec g;
  g.family = Family::QuadraticCapG;
  g.l = o.eps_cone;
  g.gamma = o.gamma;
  for (const auto* s : after) {
    bool ok = true;
    for (std::size_t i = 0; i < s->size() && ok; ++i) ok = s->phi[i] <= barrier_value(g, s->g().r[i], 0.0);
    if (ok) {
      res.t_sigma = s->t;
      break;
    }
  }
  const double tm = 0.5 * (o.gamma + std::log(3.0));
  res.t2_from_g = res.t_sigma ? *res.t_sigma + tm : 0.0;
  res.cone_slope_from_g = o.eps_cone * (tm - o.gamma) * std::exp(-tm);
  if (res.t_sigma) {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto* s : after) {
      const double tb = s->t - *res.t_sigma;
      if (tb < 0 || tb > std::log(3.0)) continue;
      for (std::size_t i = 0; i < s->size(); ++i) v = std::max(v, s->phi[i] - barrier_value(g, s->g().r[i], tb));
    }
    res.g_violation = v;
    res.below_g = v <= 0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// bubble reinsertion

/// Replaces phi on [0, r_n) by the cap 2 arctan((r/r_n) tan(phi(r_n)/2)) and sets the axis value to 0.
inline AngleProfile bubble_reinsertion(const AngleProfile& base, double r_n) {
  const auto& g = base.g();
  const std::size_t n = g.node_index(r_n);
  if (!(r_n > 0 && r_n <= 0.25)) throw Error("bubble radius must lie in (0, 1/4]");
  const double edge = base.phi[n];
  if (!(edge > 0 && edge < pi)) throw Error("reinsertion needs phi(r_n) in (0, pi)");
  const double k = std::tan(0.5 * edge) / g.r[n];
  AngleProfile out = base;
  for (std::size_t i = 1; i < n; ++i) out.phi[i] = 2 * std::atan(k * g.r[i]);
  out.set_chi(0.0);
  return out;
}

inline AngleProfile bubble_reinsertion(const AngleProfile& base, double r_n, Trajectory& traj) {
  AngleProfile out = bubble_reinsertion(base, r_n);
  traj.add_event(Event{Event::reinsertion, base.t, pi, 0.0, r_n, 0.0});
  traj.add_event(Event{Event::boundary_jump, base.t, pi, 0.0, 0.0, 0.0});
  return out;
}

// ---------------------------------------------------------------------------
// branches

struct BranchRecord {
  std::string id;
  std::optional<double> tau;
  double r_n = 0;
  Trajectory traj;
  EnergyTrace trace;
  double jump = 0;
};

struct Scenario {
  GridPtr grid;
  InitialDataSpec init;
  SolverConfig solver;
  double blowup_horizon = 0.1;   // give up if no blowup by this time
  double base_span = 3.0;        // base branch runs to t1 + base_span
  std::vector<double> probes = {0.05, 0.025};
  double post_gap = 1e-4;
  T2Options t2;
  std::vector<double> tau_offsets;   // relative to t2
  std::vector<double> tau_list;      // absolute (used when offsets are empty)
  double r_n = 0.02;
  double tail = 0.1;                 // families run to max(tau) + tail
  int threads = 1;
};

struct Construction {
  BranchRecord base;
  std::vector<BranchRecord> family;
  double t1 = 0;
  double t1_dt = 0;
  T2Result t2;
  DropEstimate drop;
  double t_final = 0;
  std::vector<std::vector<double>> sup_dist, l2_dist;  // at t_final; base first
};

namespace detail {

inline void extend_run(BranchRecord& b, AngleProfile from, double chi, double t_end, const SolverConfig& cfg,
                       double origin, bool detect) {
  RunOptions o;
  o.detect = detect;
  o.cadence_origin = origin;
  o.snapshot_start = false;
  o.observer = b.trace.observer();
  auto res = run_until(from, chi, t_end, cfg, o);
  if (res.blowup) throw Error("branch " + b.id + ": unexpected blowup at t = " + std::to_string(res.blowup->t));
  b.traj.append(res.traj);
}

}  // namespace detail

/// Base branch only: blowup, continuation with chi = pi to t1 + base_span.
inline Construction run_base(const Scenario& sc) {
  Construction C;
  auto& B = C.base;
  B.id = "base";
  B.trace = EnergyTrace(*sc.grid, sc.probes);
  const AngleProfile start = initial_profile(sc.init, sc.grid);
  B.trace.record(start);
  RunOptions o;
  o.observer = B.trace.observer();
  auto pre = run_until(start, 0.0, sc.blowup_horizon, sc.solver, o);
  if (!pre.blowup) throw Error("no blowup detected before t = " + std::to_string(sc.blowup_horizon));
  B.traj = pre.traj;
  C.t1 = pre.blowup->t;
  C.t1_dt = pre.blowup->dt;
  B.trace.event_times.push_back(C.t1);
  const AngleProfile cont = continue_past_blowup(B.traj, pre.last, sc.solver);
  B.trace.record(cont);
  detail::extend_run(B, cont, pi, C.t1 + sc.base_span, sc.solver, C.t1, false);
  C.drop = energy_drop(B.trace, C.t1, sc.post_gap);
  return C;
}

inline const AngleProfile& snapshot_at(const Trajectory& tr, double t) {
  for (const auto& s : tr.snapshots)
    if (s.t == t) return s;
  throw Error("no snapshot at t = " + std::to_string(t));
}

/// Base branch, t2, and one reinsertion branch per tau; all branches end at the same time.
inline Construction orchestrate(const Scenario& sc) {
  Construction C = run_base(sc);
  auto& B = C.base;
  C.t2 = find_t2(B.traj, C.t1, sc.t2);

  std::vector<double> want;
  if (!sc.tau_offsets.empty())
    for (double d : sc.tau_offsets) want.push_back(C.t2.t2 + d);
  else
    want = sc.tau_list;
  if (!std::is_sorted(want.begin(), want.end())) throw config_error("tau list must be sorted ascending");

  C.t_final = B.traj.snapshots.back().t;
  if (!want.empty()) {
    const double need = want.back() + sc.tail;
    if (need > C.t_final) {
      detail::extend_run(B, B.traj.snapshots.back(), pi, need, sc.solver, C.t1, false);
    }
    // snap each tau to the first base snapshot at or after it
    std::vector<double> taus;
    for (double w : want) {
      if (w < C.t2.t2) throw Error("tau = " + std::to_string(w) + " precedes t2 = " + std::to_string(C.t2.t2));
      const AngleProfile* hit = nullptr;
      for (const auto& s : B.traj.snapshots)
        if (s.t >= w * (1 - 1e-12) && s.chi == pi) {
          hit = &s;
          break;
        }
      if (!hit) throw Error("tau = " + std::to_string(w) + " lies beyond the base horizon");
      taus.push_back(hit->t);
    }
    C.t_final = 0;
    for (const auto& s : B.traj.snapshots)
      if (s.t >= taus.back() + sc.tail * (1 - 1e-9)) {
        C.t_final = s.t;
        break;
      }
    if (C.t_final == 0) throw Error("base horizon too short for the family tail");

    C.family.resize(taus.size());
    auto build = [&](std::size_t k) {
      auto& F = C.family[k];
      F.id = "tau_" + std::to_string(k);
      F.tau = taus[k];
      const double tau = taus[k];
      try {
        const AngleProfile& at_tau = snapshot_at(B.traj, tau);
        F.r_n = sc.grid->r[sc.grid->first_node_at_least(sc.r_n)];
        for (const auto& s : B.traj.snapshots)
          if (s.t < tau) F.traj.add_snapshot(s);
        for (const auto& e : B.traj.events) F.traj.add_event(e);
        F.trace.probe_r = B.trace.probe_r;
        F.trace.probe_idx = B.trace.probe_idx;
        F.trace.event_times = B.trace.event_times;
        for (const auto& s : B.trace.samples)
          if (s.t < tau || (s.t == tau && s.chi == pi)) F.trace.samples.push_back(s);
        AngleProfile spliced = bubble_reinsertion(at_tau, F.r_n, F.traj);
        F.trace.event_times.push_back(tau);
        F.traj.add_snapshot(spliced);
        F.trace.record(spliced);
        F.jump = energy_jump(F.trace, tau, energy(at_tau));
        detail::extend_run(F, spliced, 0.0, C.t_final, sc.solver, C.t1, false);
      } catch (const Error& e) {
        throw Error(e.kind(), "branch " + F.id + ": " + e.what());
      }
    };
    const std::size_t nt = std::max(1, sc.threads);
    for (std::size_t k0 = 0; k0 < taus.size(); k0 += nt) {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errs(taus.size());
      for (std::size_t k = k0; k < std::min(taus.size(), k0 + nt); ++k)
        pool.emplace_back([&, k] {
          try {
            build(k);
          } catch (...) {
            errs[k] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    }
  }

  // distances at the common final time
  std::vector<const BranchRecord*> all{&B};
  for (const auto& F : C.family) all.push_back(&F);
  const std::size_t m = all.size();
  C.sup_dist.assign(m, std::vector<double>(m, 0.0));
  C.l2_dist.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const auto& pa = snapshot_at(all[a]->traj, C.t_final);
      const auto& pb = snapshot_at(all[b]->traj, C.t_final);
      double sup = 0;
      std::vector<double> d2(pa.size());
      for (std::size_t i = 0; i < pa.size(); ++i) {
        const double d = pa.phi[i] - pb.phi[i];
        sup = std::max(sup, std::abs(d));
        d2[i] = d * d;
      }
      C.sup_dist[a][b] = C.sup_dist[b][a] = sup;
      C.l2_dist[a][b] = C.l2_dist[b][a] = std::sqrt(weighted_integral(pa.g(), d2));
    }
  return C;
}

// ---------------------------------------------------------------------------
// distances between branches

namespace detail {

/// Linear interpolation in time between snapshots; refuses to cross an event.
inline AngleProfile profile_at(const Trajectory& tr, double t) {
  const auto& S = tr.snapshots;
  for (std::size_t k = 0; k < S.size(); ++k) {
    if (S[k].t == t) return S[k];
    if (S[k].t > t) {
      if (k == 0) break;
      if (S[k - 1].chi != S[k].chi) throw Error("time " + std::to_string(t) + " lies inside an event gap");
      const double s = (t - S[k - 1].t) / (S[k].t - S[k - 1].t);
      AngleProfile p = S[k - 1];
      for (std::size_t i = 0; i < p.size(); ++i) p.phi[i] += s * (S[k].phi[i] - S[k - 1].phi[i]);
      p.t = t;
      return p;
    }
  }
  throw Error("time " + std::to_string(t) + " is outside the trajectory");
}

}  // namespace detail

struct Distance {
  double sup = 0;
  double l2 = 0;  // r-weighted
};

inline Distance branch_distance(const BranchRecord& a, const BranchRecord& b, double t) {
  const AngleProfile pa = detail::profile_at(a.traj, t);
  const AngleProfile pb = detail::profile_at(b.traj, t);
  Distance d;
  std::vector<double> d2(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double v = pa.phi[i] - pb.phi[i];
    d.sup = std::max(d.sup, std::abs(v));
    d2[i] = v * v;
  }
  d.l2 = std::sqrt(weighted_integral(pa.g(), d2));
  return d;
}

}  // namespace bubbleflow
