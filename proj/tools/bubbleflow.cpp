// Scenario runner: simulate, verify-barriers, branch-family, export-fields.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "bubbleflow/io.hpp"

using namespace bubbleflow;

namespace {

struct Args {
  std::string config;
  std::string out;
  std::string branch = "base";
  int threads = 0;
};

Config prepare(const Args& a) {
  Config c = load_config(a.config);
  if (!a.out.empty()) c.out_dir = a.out;
  if (a.threads > 0) c.threads = a.threads;
  c.scan.threads = c.threads;
  validate_output(c);
  return c;
}

int cmd_simulate(const Args& a) {
  const Config c = prepare(a);
  const Construction C = run_base(c.scenario());
  BranchSummary sum;
  sum.t1 = C.t1;
  sum.final_distances = {0.0};
  sum.extra["t1_step"] = C.t1_dt;
  sum.extra["drop"] = Json{{"probe_r", C.drop.probe_r},
                           {"drop", C.drop.drop},
                           {"extrapolated", C.drop.extrapolated},
                           {"t_pre", C.drop.t_pre},
                           {"t_post", C.drop.t_post}};
  sum.extra["gronwall_worst"] = gronwall_worst(C.base.trace);
  write_branch(c.out_dir / "branches" / "base", C.base, c, sum);
  std::printf("t1 = %.10g\n", C.t1);
  for (std::size_t k = 0; k < C.drop.drop.size(); ++k)
    std::printf("energy drop inside r = %.6g: %.6f\n", C.drop.probe_r[k], C.drop.drop[k]);
  std::printf("extrapolated drop: %.6f\n", C.drop.extrapolated);
  return 0;
}

Json fixture_params(const BarrierSpec& b) {
  return Json{{"delta", b.delta}, {"eps", b.eps},     {"mu", b.mu},           {"lambda0", b.lambda0},
              {"sigma", b.sigma}, {"l", b.l},         {"gamma", b.gamma},     {"mu_star", b.mu_star},
              {"slope", b.slope}};
}

Json scan_json(const ScanResult& s) {
  return Json{{"margin", s.margin}, {"r_worst", s.r_worst}, {"t_worst", s.t_worst}, {"samples", s.samples}};
}

int cmd_verify_barriers(const Args& a) {
  const Config c = prepare(a);
  if (c.fixtures.empty()) throw config_error("barriers.fixtures lists no fixture");
  std::vector<Fixture> fx;
  for (const auto& p : c.fixtures) fx.push_back(load_fixture(c.resolve(p)));

  Json report{{"schema_version", schema_version}, {"fixtures", Json::array()}};
  std::vector<std::string> failures;
  for (const auto& f : fx) {
    const auto& b = f.spec;
    Json e{{"name", f.name}, {"family", family_name(b.family)}, {"target", f.target}, {"params", fixture_params(b)}};
    bool ok = true;
    if (b.eps > 0 && b.eps <= 1) {
      e["M_eps"] = max_s_function(b.eps);
      e["delta_bound"] = delta_bound(b.mu, b.eps);
    }
    e["theta_cos_bound"] = theta_cos_bound(b.mu, b.eps);
    std::string why;
    if (b.family == Family::SubsolutionPhi) {
      try {
        b.path().validate();
        e["T_lambda"] = first_vanishing_time(b.path());
      } catch (const Error& err) {
        ok = false;
        why = err.what();
      }
    }
    if (b.family == Family::SupersolutionPsi && theta_cos_bound(b.mu, b.eps) < 0) {
      ok = false;
      why = "theta_cos_bound negative";
    }
    if (ok) {
      if (f.target == "exact") {
        const auto lo = scan_residual(b, Target::subsolution, c.scan);
        const auto hi = scan_residual(b, Target::supersolution, c.scan);
        e["scan_min"] = scan_json(lo);
        e["scan_max"] = scan_json(hi);
        ok = std::abs(lo.margin) <= 1e-10 && std::abs(hi.margin) <= 1e-10;
        if (!ok) why = "residual not zero: " + std::to_string(std::max(-lo.margin, hi.margin));
      } else {
        const Target tg = f.target == "subsolution" ? Target::subsolution : Target::supersolution;
        const auto s = scan_residual(b, tg, c.scan);
        e["scan"] = scan_json(s);
        ok = certified(tg, s.margin);
        if (!ok) why = "margin " + std::to_string(s.margin);
      }
    }
    e["certified"] = ok;
    if (!ok) {
      e["reason"] = why;
      failures.push_back(f.name + ": " + why);
    }
    std::printf("%-24s %-14s %s\n", f.name.c_str(), f.target.c_str(), ok ? "certified" : ("FAILED (" + why + ")").c_str());
    report["fixtures"].push_back(e);
  }

  if (c.search) {
    ScanSettings s = c.scan;
    s.n_r = s.n_t = c.search_n;
    Json searches = Json::array();
    for (Target tg : {Target::subsolution, Target::supersolution}) {
      const char* name = tg == Target::subsolution ? "subsolution" : "supersolution";
      Json e{{"target", name}};
      try {
        const auto cs = certify_parameters(tg, tg == Target::subsolution ? c.sub_box : c.super_box, s);
        e["certified"] = true;
        e["params"] = fixture_params(cs.spec);
        e["scan"] = scan_json(cs.scan);
        std::printf("search %-16s certified mu=%g eps=%g delta=%g margin=%.3e\n", name, cs.spec.mu, cs.spec.eps,
                    cs.spec.delta, cs.scan.margin);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::certification) throw;
        e["certified"] = false;
        e["reason"] = err.what();
        failures.push_back(std::string("search ") + name + ": " + err.what());
        std::printf("search %-16s FAILED (%s)\n", name, err.what());
      }
      searches.push_back(e);
    }
    report["searches"] = searches;
  }
  fs::create_directories(c.out_dir);
  detail::write_json(c.out_dir / "barriers_report.json", report);
  if (!failures.empty()) throw Error(ErrorKind::certification, "certification failed: " + failures.front());
  return 0;
}

int cmd_branch_family(const Args& a) {
  const Config c = prepare(a);
  if (c.tau_offsets.empty() && c.tau_list.empty()) throw config_error("branch-family needs a nonempty tau list");
  const Construction C = orchestrate(c.scenario());
  std::vector<const BranchRecord*> all{&C.base};
  for (const auto& f : C.family) all.push_back(&f);

  const fs::path root = c.out_dir / "branches";
  for (std::size_t k = 0; k < all.size(); ++k) {
    BranchSummary sum;
    sum.t1 = C.t1;
    sum.t2 = C.t2.t2;
    sum.final_distances = C.sup_dist[k];
    sum.extra["final_time"] = C.t_final;
    sum.extra["final_l2_distances"] = C.l2_dist[k];
    sum.extra["gronwall_worst"] = gronwall_worst(all[k]->trace);
    write_branch(root / all[k]->id, *all[k], c, sum);
  }

  detail::File f(c.out_dir / "branch_summary.csv");
  std::fprintf(f.f, "branch_id,tau,r_n,jump");
  for (const auto* b : all) std::fprintf(f.f, ",dist_%s", b->id.c_str());
  std::fprintf(f.f, "\n");
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto* b = all[k];
    if (b->tau) std::fprintf(f.f, "%s,%.17g,%.17g,%.17g", b->id.c_str(), *b->tau, b->r_n, b->jump);
    else std::fprintf(f.f, "%s,,,", b->id.c_str());
    for (double d : C.sup_dist[k]) std::fprintf(f.f, ",%.17g", d);
    std::fprintf(f.f, "\n");
  }
  f.close();

  Json t2{{"t2", C.t2.t2},
          {"eps_cone", c.t2.eps_cone},
          {"t_sigma", C.t2.t_sigma ? Json(*C.t2.t_sigma) : Json(nullptr)},
          {"below_g", C.t2.below_g},
          {"g_violation", C.t2.g_violation},
          {"t2_from_g", C.t2.t2_from_g},
          {"cone_slope_from_g", C.t2.cone_slope_from_g}};
  Json ids = Json::array();
  for (const auto* b : all) ids.push_back(b->id);
  detail::write_json(c.out_dir / "branch_summary.json",
                     Json{{"schema_version", schema_version},
                          {"t1", C.t1},
                          {"t2", t2},
                          {"final_time", C.t_final},
                          {"branches", ids},
                          {"sup_distance", C.sup_dist},
                          {"l2_distance", C.l2_dist}});

  std::printf("t1 = %.10g  t2 = %.6g  final time = %.6g\n", C.t1, C.t2.t2, C.t_final);
  for (const auto& b : C.family) std::printf("%-8s tau = %.6g  r_n = %.5g  jump = %.6f\n", b.id.c_str(), *b.tau, b.r_n, b.jump);
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::printf("%-8s", all[i]->id.c_str());
    for (double d : C.sup_dist[i]) std::printf(" %8.4f", d);
    std::printf("\n");
  }
  return 0;
}

int cmd_export_fields(const Args& a) {
  const Config c = prepare(a);
  const fs::path dir = c.out_dir / "branches" / a.branch;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::missing_artifact, "no output for branch '" + a.branch + "' in " + dir.string());
  StoredBranch b = read_branch(dir);
  const auto series =
      export_vtk(b.snapshots, c.sampling, c.out_dir / "fields" / a.branch, "field", std::size_t(c.export_stride));
  std::printf("wrote %zu VTK files to %s\n", series.size(), (c.out_dir / "fields" / a.branch).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bubbleflow: radial harmonic map heat flow lab"};
  app.require_subcommand(1);
  Args a;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", a.config, "scenario config file")->required();
    s->add_option("--out", a.out, "output directory (overrides output.dir)");
    s->add_option("--threads", a.threads, "worker threads")->check(CLI::NonNegativeNumber);
  };
  auto* sim = app.add_subcommand("simulate", "run the base branch through blowup and continuation");
  auto* ver = app.add_subcommand("verify-barriers", "certify barrier fixtures and search parameter boxes");
  auto* fam = app.add_subcommand("branch-family", "base branch plus one reinsertion branch per tau");
  auto* exp = app.add_subcommand("export-fields", "VTK series of (u, d, P) for a stored branch");
  for (auto* s : {sim, ver, fam, exp}) add_common(s);
  exp->add_option("--branch", a.branch, "branch id (default base)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(a);
    if (*ver) return cmd_verify_barriers(a);
    if (*fam) return cmd_branch_family(a);
    if (*exp) return cmd_export_fields(a);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return int(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 1;
}
