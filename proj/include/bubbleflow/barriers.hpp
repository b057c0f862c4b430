#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "grid.hpp"

namespace bubbleflow {

// ---------------------------------------------------------------------------
// lambda(t) paths

struct LambdaPath {
  enum Direction { shrinking, growing };
  Direction direction = shrinking;
  double delta = 1.0;
  double eps = 0.5;
  double lambda0 = 0.0;

  void validate() const {
    if (!(delta > 0)) throw config_error("lambda path needs delta > 0");
    if (!(eps > 0 && eps < 1)) throw config_error("lambda path needs eps in (0,1)");
    if (direction == shrinking) {
      const double lhs = 2 * std::pow(lambda0, 1 - eps);
      if (!(lambda0 > 0 && lhs < delta * (1 - eps)))
        throw config_error("shrinking lambda path needs 0 < 2 lambda0^(1-eps) < delta (1-eps)");
    }
  }
};

inline double first_vanishing_time(const LambdaPath& p) {
  if (p.direction != LambdaPath::shrinking) throw Error("growing lambda path never vanishes");
  p.validate();
  const double k = p.delta * (1 - p.eps);
  // log1p keeps accuracy when lambda0 is tiny
  return -0.5 * std::log1p(-2 * std::pow(p.lambda0, 1 - p.eps) / k);
}

/// lambda^{1-eps}(t) from the closed form.
inline double lambda_power(const LambdaPath& p, double t) {
  const double s = 0.5 * p.delta * (1 - p.eps) * (-std::expm1(-2 * t));
  if (p.direction == LambdaPath::growing) return s;
  return std::pow(p.lambda0, 1 - p.eps) - s;
}

inline double lambda_value(const LambdaPath& p, double t) {
  if (t < 0) throw Error("lambda path evaluated at negative time");
  double base = lambda_power(p, t);
  if (p.direction == LambdaPath::shrinking) {
    if (base < 0) {
      if (base < -1e-14 * std::pow(p.lambda0, 1 - p.eps)) throw Error("shrinking lambda path vanished before t");
      base = 0;
    }
  }
  return std::pow(base, 1 / (1 - p.eps));
}

/// d lambda / dt.
inline double lambda_rate(const LambdaPath& p, double t) {
  const double v = p.delta * std::exp(-2 * t) * std::pow(lambda_value(p, t), p.eps);
  return p.direction == LambdaPath::growing ? v : -v;
}

// ---------------------------------------------------------------------------
// constants of the supersolution construction

/// cos(2 arctan(1/mu)) - 1/(1+eps).
inline double theta_cos_bound(double mu, double eps) {
  return (mu * mu - 1) / (mu * mu + 1) - 1 / (1 + eps);
}

/// max over s > 0 of s^{2-eps} / (1+s^2), attained at s^2 = (2-eps)/eps.
inline double max_s_function(double eps) {
  if (!(eps > 0 && eps <= 1)) throw Error("max_s_function needs eps in (0,1]");
  const double s2 = (2 - eps) / eps;
  return std::pow(s2, 1 - 0.5 * eps) / (1 + s2);
}

inline double delta_bound(double mu, double eps) {
  return mu * eps / (max_s_function(eps) * (mu * mu + 1));
}

// ---------------------------------------------------------------------------
// barrier families

enum class Family { SubsolutionPhi, SupersolutionPsi, ShiftedBubblePhiBar, QuadraticCapG, SmallBubblePsiStar, ConePiMinusEpsR };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::SubsolutionPhi: return "SubsolutionPhi";
    case Family::SupersolutionPsi: return "SupersolutionPsi";
    case Family::ShiftedBubblePhiBar: return "ShiftedBubblePhiBar";
    case Family::QuadraticCapG: return "QuadraticCapG";
    case Family::SmallBubblePsiStar: return "SmallBubblePsiStar";
    case Family::ConePiMinusEpsR: return "ConePiMinusEpsR";
  }
  return "?";
}

inline Family family_from_name(const std::string& s) {
  for (Family f : {Family::SubsolutionPhi, Family::SupersolutionPsi, Family::ShiftedBubblePhiBar, Family::QuadraticCapG,
                   Family::SmallBubblePsiStar, Family::ConePiMinusEpsR})
    if (s == family_name(f)) return f;
  throw config_error("unknown barrier family '" + s + "'");
}

struct BarrierSpec {
  Family family = Family::SubsolutionPhi;
  double delta = 1.0, eps = 0.5, mu = 3.0, lambda0 = 0.0;
  double sigma = 1.0;
  double l = 0.1, gamma = 1.05;
  double mu_star = 1.0;
  double slope = 0.1;

  double a() const { return 1 + eps; }

  LambdaPath path() const {
    LambdaPath p;
    p.delta = delta;
    p.eps = eps;
    if (family == Family::SubsolutionPhi) {
      p.direction = LambdaPath::shrinking;
      p.lambda0 = lambda0;
    } else {
      p.direction = LambdaPath::growing;
    }
    return p;
  }

  /// Upper end of the time domain (infinite unless the family has a vanishing path).
  double t_max() const {
    if (family == Family::SubsolutionPhi) return first_vanishing_time(path());
    if (family == Family::QuadraticCapG) return std::log(3.0);
    return std::numeric_limits<double>::infinity();
  }
};

namespace detail {

/// 2 arctan(r^p / L) with L >= 0 and its trigonometric data, free of cancellation.
struct Atom {
  double n, L, D, s, c;  // r^p, L, L^2 + n^2, sin, cos of the angle
  double value;

  Atom(double r, double p, double Lv) : n(std::pow(r, p)), L(Lv) {
    D = L * L + n * n;
    s = 2 * n * L / D;
    c = (L * L - n * n) / D;
    value = 2 * std::atan2(n, L);
  }
  double sin2() const { return 2 * s * c; }
  double sin_sq() const { return s * s; }
  /// r A_r + A_t for a scale with p L - L' = K.
  double transport(double K) const { return 2 * n * K / D; }
  /// A_t for a scale with rate Ldot.
  double dt(double Ldot) const { return -2 * n * Ldot / D; }
};

/// (x - sin x) without cancellation.
inline double x_minus_sin(double x) {
  if (std::abs(x) > 0.1) return x - std::sin(x);
  const double x2 = x * x;
  return x * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72)));
}

inline void check_domain(const BarrierSpec& b, double r, double t) {
  if (!(r >= 0 && r <= 1) || !(t >= 0)) throw Error("barrier evaluated outside [0,1] x [0,inf)");
  if (t > b.t_max() * (1 + 1e-14)) throw Error(std::string(family_name(b.family)) + " evaluated beyond its time domain");
}

}  // namespace detail

inline double barrier_value(const BarrierSpec& b, double r, double t) {
  detail::check_domain(b, r, t);
  const double a = b.a();
  switch (b.family) {
    case Family::SubsolutionPhi: {
      if (r == 0) return 0;
      const double lam = lambda_value(b.path(), std::min(t, b.t_max()));
      return detail::Atom(r, 1, lam * std::exp(t)).value + detail::Atom(r, a, b.mu * std::exp(t)).value;
    }
    case Family::SupersolutionPsi: {
      if (r == 0) return t == 0 ? pi : 0.0;
      const double lam = lambda_value(b.path(), t);
      return detail::Atom(r, 1, lam * std::exp(t)).value - detail::Atom(r, a, b.mu * std::exp(a * t)).value;
    }
    case Family::ShiftedBubblePhiBar:
      return 2 * std::atan(r / (b.sigma * std::exp(t))) + pi;
    case Family::QuadraticCapG:
      return pi + b.l * (b.gamma - t) * r * std::exp(-t) - b.l * r * r * std::exp(-2 * t);
    case Family::SmallBubblePsiStar:
      return 2 * std::atan(r / b.mu_star);
    case Family::ConePiMinusEpsR:
      return pi - b.slope * r;
  }
  return 0;
}

/// Exact time derivative of barrier_value (used for the finite-difference cross-check).
inline double barrier_time_derivative(const BarrierSpec& b, double r, double t) {
  detail::check_domain(b, r, t);
  const double a = b.a();
  const double et = std::exp(t);
  switch (b.family) {
    case Family::SubsolutionPhi: {
      if (r == 0) return 0;
      const auto P = b.path();
      const double lam = lambda_value(P, t), dlam = lambda_rate(P, t);
      return detail::Atom(r, 1, lam * et).dt((dlam + lam) * et) + detail::Atom(r, a, b.mu * et).dt(b.mu * et);
    }
    case Family::SupersolutionPsi: {
      if (r == 0) return 0;
      const auto P = b.path();
      const double lam = lambda_value(P, t), dlam = lambda_rate(P, t);
      const double eat = std::exp(a * t);
      return detail::Atom(r, 1, lam * et).dt((dlam + lam) * et) - detail::Atom(r, a, b.mu * eat).dt(a * b.mu * eat);
    }
    case Family::ShiftedBubblePhiBar:
      return detail::Atom(r, 1, b.sigma * et).dt(b.sigma * et);
    case Family::QuadraticCapG:
      return -b.l * std::exp(-t) * (1 + b.gamma - t) * r + 2 * b.l * r * r * std::exp(-2 * t);
    case Family::SmallBubblePsiStar:
    case Family::ConePiMinusEpsR:
      return 0;
  }
  return 0;
}

/**
 * f_rr + f_r/r - sin(2f)/(2r^2) - r f_r - f_t for the family at (r,t), r > 0.
 * Sums and differences of arctan atoms go through
 *   sin2A + sin2B - sin(2A+2B) = 2 sin2A sin^2 B + 2 sin2B sin^2 A,
 * and each atom 2 arctan(r^p/L) contributes (p^2-1) sin(2A)/(2r^2) on its own.
 */
inline double barrier_residual(const BarrierSpec& b, double r, double t) {
  detail::check_domain(b, r, t);
  if (r == 0) throw Error("barrier residual is not defined on the axis");
  const double a = b.a();
  const double et = std::exp(t);
  const double ir = 1 / r;
  switch (b.family) {
    case Family::SubsolutionPhi: {
      const auto P = b.path();
      const double lam = lambda_value(P, t);
      detail::Atom A(r, 1, lam * et), B(r, a, b.mu * et);
      const double KA = b.delta * std::exp(-t) * std::pow(lam, b.eps);
      const double KB = b.eps * b.mu * et;
      const double tau = (A.sin2() * ir) * (B.sin_sq() * ir) + (B.sin2() * ir) * (A.sin_sq() * ir) +
                         0.5 * (a * a - 1) * B.sin2() * ir * ir;
      return tau - A.transport(KA) - B.transport(KB);
    }
    case Family::SupersolutionPsi: {
      const auto P = b.path();
      const double lam = lambda_value(P, t);
      detail::Atom A(r, 1, lam * et), T(r, a, b.mu * std::exp(a * t));
      const double KA = -b.delta * std::exp(-t) * std::pow(lam, b.eps);
      const double tau = (A.sin2() * ir) * (T.sin_sq() * ir) - (T.sin2() * ir) * (A.sin_sq() * ir) -
                         0.5 * (a * a - 1) * T.sin2() * ir * ir;
      return tau - A.transport(KA);
    }
    case Family::ShiftedBubblePhiBar: {
      // p = 1 carries no tension term; the transport rate p L - L' vanishes for L = sigma e^t
      const double L = b.sigma * et, Ldot = b.sigma * et;
      return -detail::Atom(r, 1, L).transport(L - Ldot);
    }
    case Family::QuadraticCapG: {
      const double u = b.l * (b.gamma - t) * r * std::exp(-t) - b.l * r * r * std::exp(-2 * t);
      return -3 * b.l * std::exp(-2 * t) + b.l * r * std::exp(-t) + 0.5 * detail::x_minus_sin(2 * u) * ir * ir;
    }
    case Family::SmallBubblePsiStar: {
      detail::Atom A(r, 1, b.mu_star);
      return -A.transport(b.mu_star);
    }
    case Family::ConePiMinusEpsR:
      return b.slope * r - 0.5 * detail::x_minus_sin(2 * b.slope * r) * ir * ir;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// certification by dense sampling

enum class Target { subsolution, supersolution };

struct ScanSettings {
  int n_r = 400;
  int n_t = 400;
  double r_lo = 1e-4;
  double r_hi = 1.0;
  double t_hi = 3.0;  // clipped to the family's time domain
  int refine = 4;
  int threads = 1;
};

struct ScanResult {
  double margin = 0;  // worst signed residual: min for subsolutions, max for supersolutions
  double r_worst = 0, t_worst = 0;
  long samples = 0;
};

namespace detail {

inline bool worse(Target tg, double a, double b) { return tg == Target::subsolution ? a < b : a > b; }

}  // namespace detail

/// Worst residual over a log(r) x linear(t) lattice, refined around the worst node.
inline ScanResult scan_residual(const BarrierSpec& b, Target tg, const ScanSettings& s) {
  const double t_end = std::min(s.t_hi, b.t_max());
  const bool open_end = t_end == b.t_max();
  const double lr0 = std::log(s.r_lo), lr1 = std::log(s.r_hi);
  auto r_at = [&](double i) { return std::min(s.r_hi, std::exp(lr0 + (lr1 - lr0) * i / (s.n_r - 1))); };
  // a vanishing path is sampled on [0, T) only
  const double t_den = open_end ? s.n_t : s.n_t - 1;
  auto t_at = [&](double j) { return t_end * j / t_den; };

  const int nthreads = std::max(1, s.threads);
  std::vector<ScanResult> part(static_cast<std::size_t>(nthreads));
  auto work = [&](int id) {
    ScanResult w;
    w.margin = tg == Target::subsolution ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity();
    for (int j = id; j < s.n_t; j += nthreads)
      for (int i = 0; i < s.n_r; ++i) {
        const double r = r_at(i), t = t_at(j);
        const double v = barrier_residual(b, r, t);
        ++w.samples;
        if (detail::worse(tg, v, w.margin) || (v == w.margin && (t < w.t_worst || (t == w.t_worst && r < w.r_worst)))) {
          w.margin = v;
          w.r_worst = r;
          w.t_worst = t;
        }
      }
    part[static_cast<std::size_t>(id)] = w;
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < nthreads; ++k) pool.emplace_back(work, k);
  work(0);
  for (auto& th : pool) th.join();

  ScanResult best = part[0];
  for (std::size_t k = 1; k < part.size(); ++k) {
    const auto& w = part[k];
    best.samples += w.samples;
    if (detail::worse(tg, w.margin, best.margin) ||
        (w.margin == best.margin && (w.t_worst < best.t_worst || (w.t_worst == best.t_worst && w.r_worst < best.r_worst)))) {
      best.margin = w.margin;
      best.r_worst = w.r_worst;
      best.t_worst = w.t_worst;
    }
  }

  if (s.refine > 1) {
    const double ic = (std::log(best.r_worst) - lr0) / (lr1 - lr0) * (s.n_r - 1);
    const double jc = best.t_worst / t_end * t_den;
    const int m = s.refine;
    for (int dj = -m; dj <= m; ++dj)
      for (int di = -m; di <= m; ++di) {
        const double ii = std::clamp(ic + static_cast<double>(di) / m, 0.0, s.n_r - 1.0);
        const double jj = std::clamp(jc + static_cast<double>(dj) / m, 0.0, open_end ? t_den - 1.0 / m : t_den);
        const double r = r_at(ii), t = t_at(jj);
        const double v = barrier_residual(b, r, t);
        ++best.samples;
        if (detail::worse(tg, v, best.margin)) {
          best.margin = v;
          best.r_worst = r;
          best.t_worst = t;
        }
      }
  }
  return best;
}

/// Inclusive parameter ranges with point counts; count 1 uses the lower end.
struct Range {
  double lo = 0, hi = 0;
  int n = 1;
  double at(int k) const { return n <= 1 ? lo : lo + (hi - lo) * k / (n - 1); }
};

struct SearchBox {
  Range mu, eps, lambda0;
  Range delta;              // absolute delta (subsolution)
  Range delta_factor;       // multiple of delta_bound (supersolution)
  bool delta_relative = false;
};

struct CertifiedSet {
  BarrierSpec spec;
  Target target = Target::subsolution;
  ScanResult scan;
  ScanSettings settings;
};

inline bool certified(Target tg, double margin, double tol = 1e-10) {
  return tg == Target::subsolution ? margin >= -tol : margin <= tol;
}

/// Grid search over the box; returns the candidate with the best worst-case margin among certified ones.
inline CertifiedSet certify_parameters(Target tg, const SearchBox& box, const ScanSettings& s) {
  bool have = false, have_best_any = false;
  CertifiedSet best, best_any;
  std::string reason;
  for (int im = 0; im < std::max(1, box.mu.n); ++im)
    for (int ie = 0; ie < std::max(1, box.eps.n); ++ie)
      for (int id = 0; id < std::max(1, box.delta_relative ? box.delta_factor.n : box.delta.n); ++id)
        for (int il = 0; il < std::max(1, tg == Target::subsolution ? box.lambda0.n : 1); ++il) {
          BarrierSpec b;
          b.family = tg == Target::subsolution ? Family::SubsolutionPhi : Family::SupersolutionPsi;
          b.mu = box.mu.at(im);
          b.eps = box.eps.at(ie);
          if (tg == Target::supersolution) {
            if (theta_cos_bound(b.mu, b.eps) < 0) {
              reason = "theta_cos_bound negative";
              continue;
            }
            b.delta = box.delta_relative ? box.delta_factor.at(id) * delta_bound(b.mu, b.eps) : box.delta.at(id);
          } else {
            b.delta = box.delta.at(id);
            b.lambda0 = box.lambda0.at(il);
            try {
              b.path().validate();
            } catch (const Error& e) {
              reason = e.what();
              continue;
            }
          }
          CertifiedSet c{b, tg, scan_residual(b, tg, s), s};
          if (!have_best_any || detail::worse(tg, best_any.scan.margin, c.scan.margin)) {
            best_any = c;
            have_best_any = true;
          }
          if (certified(tg, c.scan.margin) && (!have || detail::worse(tg, best.scan.margin, c.scan.margin))) {
            best = c;
            have = true;
          }
        }
  if (!have) {
    std::string msg = "no parameter set in the search box certifies";
    if (have_best_any) msg += "; best margin " + std::to_string(best_any.scan.margin);
    else if (!reason.empty()) msg += " (" + reason + ")";
    throw Error(ErrorKind::certification, msg);
  }
  return best;
}

}  // namespace bubbleflow
