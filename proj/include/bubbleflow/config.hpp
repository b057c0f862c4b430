#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "barriers.hpp"
#include "branching.hpp"
#include "field3d.hpp"

namespace bubbleflow {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace detail

/// Accepts plain numbers and multiples of pi: "1.5pi", "1.5*pi", "pi", "pi/2".
inline double parse_number(const std::string& key, const std::string& text) {
  std::string s = detail::trim(text);
  auto fail = [&] { return config_error(key + ": cannot parse '" + text + "' as a number"); };
  if (s.empty()) throw fail();
  if (auto p = s.find("pi"); p != std::string::npos) {
    std::string coef = detail::trim(s.substr(0, p)), rest = detail::trim(s.substr(p + 2));
    if (!coef.empty() && coef.back() == '*') coef = detail::trim(coef.substr(0, coef.size() - 1));
    double c = coef.empty() ? 1.0 : parse_number(key, coef);
    double d = 1;
    if (!rest.empty()) {
      if (rest[0] != '/') throw fail();
      d = parse_number(key, rest.substr(1));
    }
    return c * pi / d;
  }
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    throw fail();
  }
  if (used != s.size()) throw fail();
  return v;
}

/// Flat key = value file; '#' starts a comment.
class KeyValues {
public:
  static KeyValues parse(std::istream& in, const std::string& origin) {
    KeyValues kv;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw config_error(origin + ":" + std::to_string(no) + ": expected key = value");
      const std::string k = detail::trim(line.substr(0, eq));
      if (k.empty()) throw config_error(origin + ":" + std::to_string(no) + ": empty key");
      if (kv.map_.count(k)) throw config_error(origin + ":" + std::to_string(no) + ": duplicate key " + k);
      kv.map_[k] = detail::trim(line.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues load(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw config_error("cannot read config file " + p.string());
    return parse(in, p.string());
  }

  bool has(const std::string& k) const { return map_.count(k) > 0; }

  std::string str(const std::string& k, const std::string& def) {
    used_.insert(k);
    auto it = map_.find(k);
    return it == map_.end() ? def : it->second;
  }
  double num(const std::string& k, double def) {
    used_.insert(k);
    auto it = map_.find(k);
    return it == map_.end() ? def : parse_number(k, it->second);
  }
  int integer(const std::string& k, int def) {
    const double v = num(k, def);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw config_error(k + " must be an integer");
    return int(v);
  }
  std::vector<double> list(const std::string& k, const std::vector<double>& def) {
    used_.insert(k);
    auto it = map_.find(k);
    if (it == map_.end()) return def;
    std::vector<double> out;
    if (detail::trim(it->second).empty()) return out;
    for (const auto& s : detail::split(it->second, ',')) out.push_back(parse_number(k, s));
    return out;
  }
  Range range(const std::string& k, Range def) {
    auto v = list(k, {def.lo, def.hi, double(def.n)});
    if (v.size() == 1) return Range{v[0], v[0], 1};
    if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2]))
      throw config_error(k + " must be 'value' or 'lo, hi, count'");
    return Range{v[0], v[1], int(v[2])};
  }

  /// Keys present in the file but never read.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : map_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

private:
  std::map<std::string, std::string> map_;
  std::set<std::string> used_;
};

struct Config {
  std::filesystem::path base_dir = ".";  // relative paths resolve against the config file's directory
  std::string grid_kind = "geometric";
  int N = 2000;
  double q = 2, r_min = 1e-10;
  InitialDataSpec init{1.5 * pi, 0.5 * pi, 1e-4};
  SolverConfig solver = [] {
    SolverConfig s;
    s.dt_min = 1e-24;  // continuation resolves the inverted core left at the blowup scale
    return s;
  }();
  double blowup_horizon = 0.1, base_span = 3.0;
  std::vector<double> probes = {0.05, 0.025};
  double post_gap = 1e-4;
  T2Options t2;
  std::vector<double> tau_offsets = {0.0, 0.5}, tau_list;
  double r_n = 0.02, tail = 0.1;
  std::vector<std::filesystem::path> fixtures;
  ScanSettings scan;
  SearchBox super_box, sub_box;
  int search_n = 100;
  bool search = true;
  Sampling sampling;
  int export_stride = 1;
  std::filesystem::path out_dir = "out";
  int threads = 1;

  GridPtr grid() const {
    if (grid_kind == "geometric") return std::make_shared<const RadialGrid>(build_geometric_grid(N, r_min));
    if (grid_kind == "power") return std::make_shared<const RadialGrid>(build_grid(N, q));
    throw config_error("grid.kind must be 'geometric' or 'power'");
  }

  Scenario scenario() const {
    Scenario s;
    s.grid = grid();
    s.init = init;
    s.solver = solver;
    s.blowup_horizon = blowup_horizon;
    s.base_span = base_span;
    s.probes = probes;
    s.post_gap = post_gap;
    s.t2 = t2;
    s.tau_offsets = tau_offsets;
    s.tau_list = tau_list;
    s.r_n = r_n;
    s.tail = tail;
    s.threads = threads;
    return s;
  }

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

namespace detail {

inline bool writable_target(std::filesystem::path p) {
  p = std::filesystem::absolute(p);
  while (!p.empty() && !std::filesystem::exists(p)) {
    if (p == p.parent_path()) return false;
    p = p.parent_path();
  }
  return std::filesystem::is_directory(p) && ::access(p.c_str(), W_OK) == 0;
}

}  // namespace detail

/// Reads and fully validates a configuration; nothing is computed or written here.
inline Config read_config(KeyValues kv, const std::filesystem::path& base_dir) {
  Config c;
  c.base_dir = base_dir;
  c.grid_kind = kv.str("grid.kind", c.grid_kind);
  c.N = kv.integer("grid.N", c.N);
  c.q = kv.num("grid.q", c.q);
  c.r_min = kv.num("grid.r_min", c.r_min);

  c.init.alpha = kv.num("init.alpha", c.init.alpha);
  c.init.beta = kv.num("init.beta", c.init.beta);
  c.init.kappa = kv.num("init.kappa", c.init.kappa);

  auto& s = c.solver;
  s.dt0 = kv.num("solver.dt0", s.dt0);
  s.dt_max = kv.num("solver.dt_max", s.dt_max);
  s.dt_min = kv.num("solver.dt_min", s.dt_min);
  s.max_change = kv.num("solver.max_change", s.max_change);
  s.theta = kv.num("solver.theta", s.theta);
  s.rho_blow = kv.num("solver.rho_blow", s.rho_blow);
  s.blow_window = kv.num("solver.blow_window", s.blow_window);
  s.near_pi_gap = kv.num("solver.near_pi_gap", s.near_pi_gap);
  s.newton_tol = kv.num("solver.newton_tol", s.newton_tol);
  s.newton_maxit = kv.integer("solver.newton_maxit", s.newton_maxit);
  s.cadence = kv.num("solver.cadence", s.cadence);

  c.blowup_horizon = kv.num("horizon.blowup", c.blowup_horizon);
  c.base_span = kv.num("horizon.base", c.base_span);
  c.probes = kv.list("diag.probes", c.probes);
  c.post_gap = kv.num("diag.post_gap", c.post_gap);
  c.t2.eps_cone = kv.num("t2.eps_cone", c.t2.eps_cone);
  c.t2.gamma = kv.num("t2.gamma", c.t2.gamma);

  const bool has_list = kv.has("branch.tau_list");
  c.tau_list = kv.list("branch.tau_list", {});
  c.tau_offsets = kv.list("branch.tau_offsets", has_list ? std::vector<double>{} : c.tau_offsets);
  if (!c.tau_list.empty() && !c.tau_offsets.empty())
    throw config_error("set either branch.tau_offsets or branch.tau_list, not both");
  c.r_n = kv.num("branch.r_n", c.r_n);
  c.tail = kv.num("branch.tail", c.tail);

  for (const auto& f : detail::split(kv.str("barriers.fixtures", ""), ','))
    if (!f.empty()) c.fixtures.push_back(f);
  c.scan.n_r = kv.integer("barriers.scan_n", 400);
  c.scan.n_t = c.scan.n_r;
  c.scan.t_hi = kv.num("barriers.t_hi", c.scan.t_hi);
  c.search = kv.str("barriers.search", "on") == "on";
  c.search_n = kv.integer("barriers.search_n", c.search_n);
  c.super_box.mu = kv.range("barriers.super.mu", {10, 50, 5});
  c.super_box.eps = kv.range("barriers.super.eps", {0.3, 0.7, 5});
  c.super_box.delta_factor = kv.range("barriers.super.delta_factor", {0.5, 0.5, 1});
  c.super_box.delta_relative = true;
  c.sub_box.mu = kv.range("barriers.sub.mu", {2, 4, 3});
  c.sub_box.eps = kv.range("barriers.sub.eps", {0.5, 0.5, 1});
  c.sub_box.delta = kv.range("barriers.sub.delta", {1, 1, 1});
  c.sub_box.lambda0 = kv.range("barriers.sub.lambda0", {1e-4, 1e-4, 1});

  c.sampling.nr = kv.integer("export.nr", c.sampling.nr);
  c.sampling.ntheta = kv.integer("export.ntheta", c.sampling.ntheta);
  c.sampling.nz = kv.integer("export.nz", c.sampling.nz);
  c.export_stride = kv.integer("export.stride", c.export_stride);
  c.out_dir = kv.str("output.dir", c.out_dir.string());

  if (auto u = kv.unused(); !u.empty()) throw config_error("unknown config key " + u.front());

  // validation
  c.init.validate();
  const GridPtr g = c.grid();
  c.solver.validate(*g);
  if (!(c.blowup_horizon > 0)) throw config_error("horizon.blowup must be positive");
  if (!(c.base_span >= c.t2.min_span)) throw config_error("horizon.base must be at least 2 (t2 needs t1 + 2)");
  if (c.probes.empty()) throw config_error("diag.probes needs at least one radius");
  for (double p : c.probes)
    if (!(p > 0 && p < 1)) throw config_error("diag.probes radii must lie in (0, 1)");
  if (!(c.post_gap > 0)) throw config_error("diag.post_gap must be positive");
  if (!(c.t2.eps_cone > 0 && c.t2.eps_cone <= pi / 2)) throw config_error("t2.eps_cone must lie in (0, pi/2]");
  if (!std::is_sorted(c.tau_list.begin(), c.tau_list.end()) || !std::is_sorted(c.tau_offsets.begin(), c.tau_offsets.end()))
    throw config_error("tau list must be sorted ascending");
  for (double d : c.tau_offsets)
    if (d < 0) throw config_error("branch.tau_offsets must be >= 0 (tau >= t2)");
  if (!(c.r_n > 0 && c.r_n <= 0.25)) throw config_error("branch.r_n must lie in (0, 1/4]");
  if (!(c.tail > 0)) throw config_error("branch.tail must be positive");
  for (const auto& f : c.fixtures)
    if (!std::filesystem::exists(c.resolve(f))) throw config_error("fixture not found: " + c.resolve(f).string());
  if (c.scan.n_r < 2 || c.search_n < 2) throw config_error("scan resolutions must be >= 2");
  c.sampling.validate();
  if (c.export_stride < 1) throw config_error("export.stride must be >= 1");
  return c;
}

inline Config load_config(const std::filesystem::path& p) {
  return read_config(KeyValues::load(p), p.has_parent_path() ? p.parent_path() : ".");
}

/// Checked separately so --out can override output.dir first.
inline void validate_output(const Config& c) {
  if (!detail::writable_target(c.out_dir)) throw config_error("output directory not writable: " + c.out_dir.string());
}

}  // namespace bubbleflow
