#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "radial_operator.hpp"

namespace bubbleflow {

using Vec3 = std::array<double, 3>;

inline Vec3 velocity(double x, double y, double z) { return {x, y, -2 * z}; }

/// Jacobian of the velocity ansatz, row i = gradient of u_i.
inline std::array<Vec3, 3> velocity_gradient(double, double, double) {
  return {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, -2}};
}

inline double divergence_u(double x, double y, double z) {
  const auto J = velocity_gradient(x, y, z);
  return J[0][0] + J[1][1] + J[2][2];
}

inline Vec3 director(const AngleProfile& p, double x, double y) {
  const double r = std::hypot(x, y);
  if (r == 0) return {0, 0, std::cos(p.chi)};
  const double f = p.at(r);
  const double s = std::sin(f);
  return {s * x / r, s * y / r, std::cos(f)};
}

/// Q at every grid node: -int_0^r (phi_t + s phi_s) phi_s ds - r^2/2, with Q(0) = 0.
inline std::vector<double> pressure_q(const AngleProfile& p, const std::vector<double>& phi_t) {
  const auto& r = p.g().r;
  const std::size_t n = r.size();
  if (phi_t.size() != n) throw Error("pressure needs a time derivative at every node");
  std::vector<double> f(n), q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d;
    if (i == 0) d = (p.phi[1] - p.phi[0]) / (r[1] - r[0]);
    else if (i + 1 == n) d = (p.phi[i] - p.phi[i - 1]) / (r[i] - r[i - 1]);
    else {
      const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
      d = (hm * hm * (p.phi[i + 1] - p.phi[i]) + hp * hp * (p.phi[i] - p.phi[i - 1])) / (hm * hp * (hm + hp));
    }
    f[i] = (phi_t[i] + r[i] * d) * d;
  }
  double acc = 0;
  for (std::size_t i = 1; i < n; ++i) {
    acc += 0.5 * (f[i] + f[i - 1]) * (r[i] - r[i - 1]);
    q[i] = -acc - 0.5 * r[i] * r[i];
  }
  return q;
}

/// First-order backward difference (forward for the first snapshot or right after an axis jump).
inline std::vector<double> time_derivative(const std::vector<AngleProfile>& snaps, std::size_t k) {
  if (snaps.size() < 2) throw Error("time derivative needs at least two snapshots");
  std::size_t a = k == 0 ? 0 : k - 1, b = k == 0 ? 1 : k;
  if (k > 0 && snaps[a].chi != snaps[b].chi) {
    if (k + 1 >= snaps.size() || snaps[k + 1].chi != snaps[k].chi) {
      return std::vector<double>(snaps[k].size(), 0.0);
    }
    a = k;
    b = k + 1;
  }
  std::vector<double> v(snaps[k].size());
  const double dt = snaps[b].t - snaps[a].t;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (snaps[b].phi[i] - snaps[a].phi[i]) / dt;
  v.front() = 0;
  return v;
}

inline double interpolate_nodes(const RadialGrid& g, const std::vector<double>& v, double x) {
  if (x <= 0) return v.front();
  if (x >= 1) return v.back();
  const std::size_t i = g.cell_of(x);
  const double s = (x - g.r[i]) / (g.r[i + 1] - g.r[i]);
  return v[i] + s * (v[i + 1] - v[i]);
}

inline double pressure(const AngleProfile& p, const std::vector<double>& phi_t, double r, double z) {
  if (phi_t.empty()) throw Error("pressure needs profile_t");
  return interpolate_nodes(p.g(), pressure_q(p, phi_t), r) - 2 * z * z;
}

// ---------------------------------------------------------------------------
// VTK export

struct Sampling {
  int nr = 16, ntheta = 32, nz = 8;
  void validate() const {
    if (nr < 2 || ntheta < 2 || nz < 2) throw config_error("export sampling counts must be >= 2");
  }
};

struct SeriesEntry {
  int index;
  double t;
  std::string file;
};

namespace detail {

inline void put3(std::FILE* f, const Vec3& v) { std::fprintf(f, "%.17g %.17g %.17g\n", v[0], v[1], v[2]); }

}  // namespace detail

/// One structured-grid file over the unit cylinder; x = r cos(theta), y = r sin(theta).
inline void write_vtk(const std::filesystem::path& file, const AngleProfile& p, const std::vector<double>& phi_t,
                      const Sampling& s) {
  s.validate();
  std::FILE* f = std::fopen(file.string().c_str(), "w");
  if (!f) throw Error(ErrorKind::internal, "cannot write " + file.string());
  const std::size_t n = std::size_t(s.nr) * s.ntheta * s.nz;
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ntheta; ++j)
      for (int i = 0; i < s.nr; ++i) {
        const double r = double(i) / (s.nr - 1), th = 2 * pi * j / s.ntheta, z = double(k) / (s.nz - 1);
        pts.push_back({i == 0 ? 0.0 : r * std::cos(th), i == 0 ? 0.0 : r * std::sin(th), z});
      }
  const auto q = pressure_q(p, phi_t);
  std::fprintf(f, "# vtk DataFile Version 3.0\nbubbleflow t=%.17g\nASCII\nDATASET STRUCTURED_GRID\n", p.t);
  std::fprintf(f, "DIMENSIONS %d %d %d\nPOINTS %zu double\n", s.nr, s.ntheta, s.nz, n);
  for (const auto& x : pts) detail::put3(f, x);
  std::fprintf(f, "POINT_DATA %zu\nVECTORS u double\n", n);
  for (const auto& x : pts) detail::put3(f, velocity(x[0], x[1], x[2]));
  std::fprintf(f, "VECTORS d double\n");
  for (const auto& x : pts) detail::put3(f, director(p, x[0], x[1]));
  std::fprintf(f, "SCALARS P double 1\nLOOKUP_TABLE default\n");
  for (const auto& x : pts)
    std::fprintf(f, "%.17g\n", interpolate_nodes(p.g(), q, std::hypot(x[0], x[1])) - 2 * x[2] * x[2]);
  const bool ok = std::fclose(f) == 0;
  if (!ok) throw Error("failed writing " + file.string());
}

/// Writes prefix_NNNNN.vtk for every stride-th snapshot (NNNNN is the snapshot index) and prefix_series.json.
inline std::vector<SeriesEntry> export_vtk(const std::vector<AngleProfile>& snaps, const Sampling& s,
                                           const std::filesystem::path& dir, const std::string& prefix = "field",
                                           std::size_t stride = 1) {
  s.validate();
  if (stride == 0) throw config_error("export stride must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
  std::vector<SeriesEntry> out;
  for (std::size_t k = 0; k < snaps.size(); k += stride) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%05zu.vtk", prefix.c_str(), k);
    write_vtk(dir / name, snaps[k], time_derivative(snaps, k), s);
    out.push_back({int(k), snaps[k].t, name});
  }
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& e : out) files.push_back({{"index", e.index}, {"t", e.t}, {"file", e.file}});
  std::ofstream m(dir / (prefix + "_series.json"));
  if (!m) throw Error("cannot write series manifest in " + dir.string());
  m << nlohmann::ordered_json{{"schema_version", 1}, {"files", files}}.dump(2) << "\n";
  return out;
}

}  // namespace bubbleflow
