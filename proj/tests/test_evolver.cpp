#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "support.hpp"

using namespace bubbleflow;
using namespace test_support;

namespace {

// phi = beta r + A e^{-t} sin(pi r), driven by the forcing phi_t - L[phi]
constexpr double mb = 0.5 * pi, mA = 0.5;

double exact(double r, double t) { return mb * r + mA * std::exp(-t) * std::sin(pi * r); }

double forcing(double r, double t) {
  const double e = mA * std::exp(-t);
  const double f = exact(r, t);
  const double ft = -e * std::sin(pi * r);
  const double fr = mb + e * pi * std::cos(pi * r);
  const double frr = -e * pi * pi * std::sin(pi * r);
  return ft - (frr + fr / r - std::sin(2 * f) / (2 * r * r) - r * fr);
}

double manufactured_error(int N, double dt) {
  const auto g = power(N, 1.0);
  SolverConfig c;
  c.dt0 = c.dt_max = dt;
  c.dt_min = dt / 4;
  c.theta = 0.5;
  c.rho_blow = 1.0;
  c.cadence = 0.1;
  RunOptions o;
  o.detect = false;
  o.forcing = forcing;
  const auto res = run_until(sample_profile(g, [](double r) { return exact(r, 0); }), 0.0, 0.2, c, o);
  double e = 0;
  for (std::size_t i = 0; i < g->size(); ++i) e = std::max(e, std::abs(res.last.phi[i] - exact(g->r[i], 0.2)));
  return e;
}

}  // namespace

TEST(InitialData, ValidationNamesTheBound) {
  InitialDataSpec s{0.9 * pi, 0.5 * pi, 0};
  try {
    s.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
  EXPECT_THROW((InitialDataSpec{1.5 * pi, pi, 0}.validate()), Error);
}

TEST(InitialData, ShapeAndBoundaryValues) {
  const InitialDataSpec s{1.5 * pi, 0.5 * pi, 1e-4};
  EXPECT_NEAR(s(0.5), 1.5 * pi, 1e-14);
  EXPECT_NEAR(s(1.0), 0.5 * pi, 1e-14);
  InitialReport rep;
  const auto p = initial_profile(s, geometric(500), &rep);
  EXPECT_EQ(p.phi.front(), 0.0);
  EXPECT_EQ(p.phi.back(), 0.5 * pi);
  EXPECT_TRUE(rep.monotone_inner && rep.monotone_outer && rep.axis_regular);
}

TEST(Step, ConstantEquilibriaStayExact) {
  const auto g = geometric(300);
  SolverConfig c;
  for (double v : {0.0, pi}) {
    const auto p = sample_profile(g, [v](double) { return v; });
    for (double dt : {1e-8, 1e-3, 0.5}) {
      const auto q = step(p, dt, v, c);
      ASSERT_TRUE(q.has_value());
      for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q->phi[i], v);
    }
  }
}

TEST(Step, ManufacturedSolutionConverges) {
  const double e1 = manufactured_error(50, 2e-3);
  const double e2 = manufactured_error(100, 1e-3);
  const double e3 = manufactured_error(200, 5e-4);
  EXPECT_LT(e3, 2e-3);
  EXPECT_GT(e1 / e2, 1.7);
  EXPECT_GT(e2 / e3, 1.7);
}

TEST(Step, ThomasSolvesTridiagonalSystem) {
  // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
  std::vector<double> a{0, -1, -1}, b{2, 2, 2}, c{-1, -1, 0}, d{1, 0, 1};
  ASSERT_TRUE(detail::thomas(a, b, c, d));
  for (double x : d) EXPECT_NEAR(x, 1.0, 1e-15);
}

TEST(Solver, ConfigValidation) {
  SolverConfig c;
  c.theta = 0.3;
  EXPECT_THROW(c.validate(*geometric(100)), Error);
  c = SolverConfig{};
  EXPECT_THROW(c.validate(*power(100)), Error);  // rho_blow below three axis spacings
  c.dt_min = 1.0;
  EXPECT_THROW(c.validate(*geometric(100)), Error);
}

TEST(Run, SnapshotsLandOnTheCadenceGrid) {
  const auto g = power(100, 1.0);
  SolverConfig c;
  c.rho_blow = 1.0;
  c.cadence = 0.05;
  RunOptions o;
  o.detect = false;
  o.cadence_origin = 0.013;
  const auto res = run_until(sample_profile(g, [](double r) { return 0.5 * pi * r; }), 0.0, 0.3, c, o);
  ASSERT_GE(res.traj.snapshots.size(), 6u);
  for (std::size_t k = 1; k + 1 < res.traj.snapshots.size(); ++k)
    EXPECT_EQ(res.traj.snapshots[k].t, 0.013 + double(k - 1) * 0.05);
  EXPECT_EQ(res.traj.snapshots.back().t, 0.3);
}

TEST(Run, NewtonFailureAtTheFloorIsASingularity) {
  const auto g = geometric(100);
  SolverConfig c;
  c.newton_maxit = 1;
  c.newton_tol = 0;
  c.dt0 = 1e-6;
  c.dt_min = 1e-9;
  const auto p = initial_profile(InitialDataSpec{1.5 * pi, 0.5 * pi, 1e-4}, g);
  try {
    run_until(p, 0.0, 1.0, c);
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.partial().snapshots.size(), 1u);
    EXPECT_NE(std::string(e.what()).find("step size"), std::string::npos);
  }
}

TEST(Blowup, DetectionAndContinuationOfATightBubble) {
  const auto g = geometric(400);
  SolverConfig c;
  const auto p = sample_profile(g, [](double r) { return 2 * std::atan(r / 1e-7); });
  const auto ev = detect_blowup(p, c);
  ASSERT_TRUE(ev.has_value());
  Trajectory tr;
  tr.add_event(*ev);
  const auto q = continue_past_blowup(tr, p, c);
  EXPECT_EQ(q.chi, pi);
  EXPECT_EQ(q.phi[0], pi);
  for (std::size_t i = 1; i < p.size(); ++i) EXPECT_EQ(q.phi[i], p.phi[i]);
  ASSERT_EQ(tr.events.size(), 2u);
  EXPECT_EQ(tr.events[1].kind, Event::boundary_jump);
  EXPECT_EQ(tr.events[1].chi_new, pi);
}

TEST(Blowup, ContinuationPreconditions) {
  const auto g = geometric(400);
  SolverConfig c;
  Trajectory empty;
  const auto p = sample_profile(g, [](double r) { return 2 * std::atan(r / 1e-7); });
  EXPECT_THROW(continue_past_blowup(empty, p, c), Error);
  // a core that never approaches pi near the axis
  const auto flat = sample_profile(g, [](double r) { return 0.5 * pi * r; });
  Trajectory tr;
  tr.add_event(Event{Event::blowup, 0.0, 0, 0, 0, 0});
  try {
    continue_past_blowup(tr, flat, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("not pi"), std::string::npos);
  }
  EXPECT_FALSE(detect_blowup(flat, c).has_value());
}

TEST(Blowup, DefaultScenarioBlowsUpOnceBeforeTheSubsolutionVanishes) {
  const auto sc = coarse_scenario();
  const auto res = run_until(initial_profile(sc.init, sc.grid), 0.0, 0.1, sc.solver);
  ASSERT_TRUE(res.blowup.has_value());
  ASSERT_EQ(res.traj.events.size(), 1u);
  EXPECT_EQ(res.traj.events[0].kind, Event::blowup);
  EXPECT_LE(res.blowup->t, fixture_subsolution().t_max());
  EXPECT_NEAR(res.blowup->t, 1.0425e-4, 5e-7);
}

TEST(Blowup, SmoothDataWithoutCoreDoesNotBlowUpEarly) {
  // without the sharp core the flow relaxes instead of collapsing
  auto sc = coarse_scenario();
  sc.init.kappa = 0;
  SolverConfig c = sc.solver;
  const auto res = run_until(initial_profile(sc.init, sc.grid), 0.0, 0.05, c);
  EXPECT_FALSE(res.blowup.has_value());
}

TEST(Run, ConcurrentRunsMatchSerialRuns) {
  const auto sc = coarse_scenario(300);
  const auto p = initial_profile(sc.init, sc.grid);
  const auto serial = run_until(p, 0.0, 0.1, sc.solver);
  RunResult a, b;
  std::thread t1([&] { a = run_until(p, 0.0, 0.1, sc.solver); });
  std::thread t2([&] { b = run_until(p, 0.0, 0.1, sc.solver); });
  t1.join();
  t2.join();
  EXPECT_EQ(a.last.phi, serial.last.phi);
  EXPECT_EQ(b.last.phi, serial.last.phi);
  EXPECT_EQ(a.blowup->t, serial.blowup->t);
}

TEST(Trajectory, OrderingIsEnforced) {
  const auto g = geometric(50);
  Trajectory tr;
  tr.add_snapshot(sample_profile(g, [](double) { return 0.0; }, 1.0));
  EXPECT_THROW(tr.add_snapshot(sample_profile(g, [](double) { return 0.0; }, 1.0)), Error);
  tr.add_event(Event{Event::blowup, 2.0, 0, 0, 0, 0});
  EXPECT_THROW(tr.add_event(Event{Event::blowup, 1.0, 0, 0, 0, 0}), Error);
}
