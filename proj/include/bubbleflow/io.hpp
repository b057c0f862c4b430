#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace bubbleflow {

inline constexpr int schema_version = 1;
using Json = nlohmann::ordered_json;

namespace fs = std::filesystem;

namespace detail {

struct File {
  std::FILE* f;
  fs::path path;
  explicit File(const fs::path& p) : f(std::fopen(p.string().c_str(), "w")), path(p) {
    if (!f) throw Error("cannot write " + p.string());
  }
  ~File() {
    if (f) std::fclose(f);
  }
  void close() {
    const bool ok = std::fclose(f) == 0;
    f = nullptr;
    if (!ok) throw Error("failed writing " + path.string());
  }
};

inline void write_json(const fs::path& p, const Json& j) {
  std::ofstream o(p);
  if (!o) throw Error("cannot write " + p.string());
  o << j.dump(2) << "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV writers; column sets are frozen

/// r,phi
inline void write_snapshot_csv(const fs::path& p, const AngleProfile& s) {
  detail::File f(p);
  std::fprintf(f.f, "r,phi\n");
  for (std::size_t i = 0; i < s.size(); ++i) std::fprintf(f.f, "%.17g,%.17g\n", s.g().r[i], s.phi[i]);
  f.close();
}

/// kind,t,chi_old,chi_new,r_n
inline void write_events_csv(const fs::path& p, const std::vector<Event>& ev) {
  detail::File f(p);
  std::fprintf(f.f, "kind,t,chi_old,chi_new,r_n\n");
  for (const auto& e : ev)
    std::fprintf(f.f, "%s,%.17g,%.17g,%.17g,%.17g\n", event_name(e.kind), e.t, e.chi_old, e.chi_new, e.r_n);
  f.close();
}

/// t,E_total,E_inner,r_half,chi,dissipation_cum; E_inner is the energy inside the first probe radius
inline void write_energy_csv(const fs::path& p, const EnergyTrace& tr) {
  detail::File f(p);
  std::fprintf(f.f, "t,E_total,E_inner,r_half,chi,dissipation_cum\n");
  for (const auto& s : tr.samples)
    std::fprintf(f.f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.E_total, s.E_probe.empty() ? 0.0 : s.E_probe[0],
                 s.r_half, s.chi, s.dissipation);
  f.close();
}

// ---------------------------------------------------------------------------
// manifests

inline Json config_json(const Config& c) {
  const auto& s = c.solver;
  return Json{{"grid", {{"kind", c.grid_kind}, {"N", c.N}, {"q", c.q}, {"r_min", c.r_min}}},
              {"init", {{"alpha", c.init.alpha}, {"beta", c.init.beta}, {"kappa", c.init.kappa}}},
              {"solver",
               {{"dt0", s.dt0}, {"dt_max", s.dt_max}, {"dt_min", s.dt_min}, {"max_change", s.max_change},
                {"theta", s.theta}, {"rho_blow", s.rho_blow}, {"blow_window", s.blow_window},
                {"near_pi_gap", s.near_pi_gap}, {"newton_tol", s.newton_tol}, {"newton_maxit", s.newton_maxit},
                {"cadence", s.cadence}}},
              {"horizon", {{"blowup", c.blowup_horizon}, {"base", c.base_span}}},
              {"diag", {{"probes", c.probes}, {"post_gap", c.post_gap}}},
              {"t2", {{"eps_cone", c.t2.eps_cone}, {"gamma", c.t2.gamma}}},
              {"branch", {{"tau_offsets", c.tau_offsets}, {"tau_list", c.tau_list}, {"r_n", c.r_n}, {"tail", c.tail}}}};
}

struct BranchSummary {
  double t1 = 0;
  std::optional<double> t2;
  std::vector<double> final_distances;  // sup-norm to every branch, base first
  Json extra = Json::object();
};

/// snapshots/snap_NNNNN.csv, events.csv, energy.csv, manifest.json under dir.
inline void write_branch(const fs::path& dir, const BranchRecord& b, const Config& c, const BranchSummary& sum) {
  fs::create_directories(dir / "snapshots");
  Json snaps = Json::array();
  for (std::size_t k = 0; k < b.traj.snapshots.size(); ++k) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshots/snap_%05zu.csv", k);
    write_snapshot_csv(dir / name, b.traj.snapshots[k]);
    snaps.push_back({{"index", k}, {"t", b.traj.snapshots[k].t}, {"chi", b.traj.snapshots[k].chi}, {"file", name}});
  }
  write_events_csv(dir / "events.csv", b.traj.events);
  write_energy_csv(dir / "energy.csv", b.trace);
  Json m{{"schema_version", schema_version},
         {"branch_id", b.id},
         {"tau", b.tau ? Json(*b.tau) : Json(nullptr)},
         {"r_n", b.tau ? Json(b.r_n) : Json(nullptr)},
         {"t1", sum.t1},
         {"t2", sum.t2 ? Json(*sum.t2) : Json(nullptr)},
         {"jump_estimate", b.tau ? Json(b.jump) : Json(nullptr)},
         {"final_distances", sum.final_distances},
         {"probe_r", b.trace.probe_r},
         {"config", config_json(c)},
         {"snapshots", snaps}};
  for (auto& [k, v] : sum.extra.items()) m[k] = v;
  detail::write_json(dir / "manifest.json", m);
}

struct StoredBranch {
  GridPtr grid;
  std::vector<AngleProfile> snapshots;
  Json manifest;
};

/// Reads a branch written by write_branch; the grid is rebuilt from the stored radii.
inline StoredBranch read_branch(const fs::path& dir) {
  const fs::path mp = dir / "manifest.json";
  if (!fs::exists(mp)) throw Error(ErrorKind::missing_artifact, "missing branch output: " + mp.string());
  StoredBranch out;
  try {
    std::ifstream in(mp);
    out.manifest = Json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::missing_artifact, "unreadable manifest " + mp.string() + ": " + e.what());
  }
  if (out.manifest.value("schema_version", 0) != schema_version)
    throw Error(ErrorKind::missing_artifact, "unsupported schema version in " + mp.string());
  for (const auto& s : out.manifest.at("snapshots")) {
    const fs::path p = dir / s.at("file").get<std::string>();
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::missing_artifact, "missing snapshot file " + p.string());
    std::string line;
    std::getline(in, line);
    std::vector<double> r, phi;
    while (std::getline(in, line)) {
      const auto c = line.find(',');
      if (c == std::string::npos) throw Error(ErrorKind::missing_artifact, "malformed row in " + p.string());
      r.push_back(std::stod(line.substr(0, c)));
      phi.push_back(std::stod(line.substr(c + 1)));
    }
    if (!out.grid) {
      auto g = std::make_shared<RadialGrid>();
      const auto& gj = out.manifest.at("config").at("grid");
      g->kind = gj.at("kind") == "power" ? GridKind::power : GridKind::geometric;
      g->q = gj.at("q");
      g->r_min = gj.at("r_min");
      g->r = r;
      detail::finish_grid(*g);
      out.grid = g;
    } else if (out.grid->r != r) {
      throw Error(ErrorKind::missing_artifact, "grid mismatch in " + p.string());
    }
    AngleProfile prof(out.grid, phi, s.at("t").get<double>());
    out.snapshots.push_back(std::move(prof));
  }
  return out;
}

// ---------------------------------------------------------------------------
// barrier fixtures

struct Fixture {
  std::string name;
  std::string target;  // subsolution, supersolution or exact
  BarrierSpec spec;
};

inline Fixture load_fixture(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw config_error("fixture not found: " + p.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw config_error("fixture " + p.string() + ": " + e.what());
  }
  Fixture f;
  try {
    f.name = j.value("name", p.stem().string());
    f.target = j.at("target").get<std::string>();
    auto& b = f.spec;
    b.family = family_from_name(j.at("family").get<std::string>());
    b.eps = j.value("eps", b.eps);
    b.mu = j.value("mu", b.mu);
    b.lambda0 = j.value("lambda0", b.lambda0);
    b.sigma = j.value("sigma", b.sigma);
    b.l = j.value("l", b.l);
    b.gamma = j.value("gamma", b.gamma);
    b.mu_star = j.value("mu_star", b.mu_star);
    b.slope = j.value("slope", b.slope);
    b.delta = j.value("delta", b.delta);
    if (j.contains("delta_factor")) b.delta = j.at("delta_factor").get<double>() * delta_bound(b.mu, b.eps);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error("fixture " + p.string() + ": " + e.what());
  }
  if (f.target != "subsolution" && f.target != "supersolution" && f.target != "exact")
    throw config_error("fixture " + p.string() + ": target must be subsolution, supersolution or exact");
  return f;
}

}  // namespace bubbleflow
