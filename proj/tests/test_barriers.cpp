#include <gtest/gtest.h>

#include <boost/math/tools/minima.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <random>

#include "support.hpp"

using namespace bubbleflow;
using namespace test_support;
namespace odeint = boost::numeric::odeint;

namespace {

// First vanishing time by integrating the time as a function of the path variable.
// With lambda = lambda0 (1-s)^m, m = 2/(1-eps): dt/ds = e^{2t} m lambda0^{1-eps} (1-s) / delta, t(0) = 0; T = t(1).
double vanishing_time_ode(double delta, double eps, double lambda0) {
  const double m = 2 / (1 - eps);
  const double k = m * std::pow(lambda0, 1 - eps) / delta;
  std::vector<double> x{0.0};
  auto rhs = [k](const std::vector<double>& y, std::vector<double>& dy, double s) { dy[0] = std::exp(2 * y[0]) * k * (1 - s); };
  odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::vector<double>>>(1e-14, 1e-14), rhs, x,
                             0.0, 1.0, 1e-4);
  return x[0];
}

// lambda(t) by forward integration of lambda' = -+delta e^{-2t} lambda^eps
double lambda_ode(double delta, double eps, double lambda0, double t, bool growing) {
  std::vector<double> x{lambda0};
  auto rhs = [&](const std::vector<double>& y, std::vector<double>& dy, double s) {
    const double v = delta * std::exp(-2 * s) * std::pow(std::max(y[0], 0.0), eps);
    dy[0] = growing ? v : -v;
  };
  odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::vector<double>>>(1e-14, 1e-12), rhs, x,
                             growing ? 1e-3 : 0.0, t, 1e-6);
  return x[0];
}

// f_rr + f_r/r - sin(2f)/(2r^2) - r f_r - f_t by Richardson-extrapolated central differences of barrier_value
double residual_fd(const BarrierSpec& b, double r, double t) {
  auto f = [&](double x, double s) { return barrier_value(b, x, s); };
  auto d1 = [&](double h) { return (f(r + h, t) - f(r - h, t)) / (2 * h); };
  auto d2 = [&](double h) { return (f(r + h, t) - 2 * f(r, t) + f(r - h, t)) / (h * h); };
  auto dt = [&](double h) { return (f(r, t + h) - f(r, t - h)) / (2 * h); };
  const double h = 1e-3 * r, k = 1e-3;
  const double fr = (4 * d1(h / 2) - d1(h)) / 3;
  const double frr = (4 * d2(h / 2) - d2(h)) / 3;
  const double ft = (4 * dt(k / 2) - dt(k)) / 3;
  const double v = f(r, t);
  return frr + fr / r - std::sin(2 * v) / (2 * r * r) - r * fr - ft;
}

}  // namespace

TEST(LambdaPath, VanishingTimeMatchesOdeIntegration) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0, 1);
  for (int k = 0; k < 10; ++k) {
    LambdaPath p;
    p.delta = 0.5 + 2 * U(rng);
    p.eps = 0.1 + 0.8 * U(rng);
    const double cap = std::pow(p.delta * (1 - p.eps) / 2, 1 / (1 - p.eps));
    p.lambda0 = cap * (0.05 + 0.9 * U(rng));
    EXPECT_NEAR(first_vanishing_time(p), vanishing_time_ode(p.delta, p.eps, p.lambda0), 1e-6) << "set " << k;
  }
}

TEST(LambdaPath, ShrinkingValuesMatchForwardIntegration) {
  const auto P = fixture_subsolution().path();
  const double T = first_vanishing_time(P);
  for (double f : {0.1, 0.5, 0.9}) {
    const double t = f * T;
    EXPECT_NEAR(lambda_value(P, t) / lambda_ode(P.delta, P.eps, P.lambda0, t, false), 1.0, 1e-7);
  }
  EXPECT_THROW(lambda_value(P, 1.01 * T), Error);
  EXPECT_NEAR(lambda_value(P, T), 0.0, 1e-12);
}

TEST(LambdaPath, GrowingClosedForm) {
  LambdaPath p;
  p.direction = LambdaPath::growing;
  for (double eps : {0.2, 0.5, 0.8})
    for (double delta : {0.01, 0.3, 2.0})
      for (double t : {1e-3, 0.1, 1.0, 5.0}) {
        p.eps = eps;
        p.delta = delta;
        const double closed = delta * (1 - eps) / 2 * (1 - std::exp(-2 * t));
        EXPECT_NEAR(lambda_power(p, t), closed, 1e-10 * closed);
        EXPECT_NEAR(lambda_value(p, t), std::pow(closed, 1 / (1 - eps)), 1e-10 * std::pow(closed, 1 / (1 - eps)));
      }
  // the growing path also solves the ODE away from its degenerate start
  p.eps = 0.5;
  p.delta = 1.0;
  const double l0 = lambda_value(p, 1e-3);
  EXPECT_NEAR(lambda_ode(1.0, 0.5, l0, 1.0, true) / lambda_value(p, 1.0), 1.0, 1e-8);
}

TEST(LambdaPath, RejectsInvalidShrinkingPath) {
  LambdaPath p;
  p.delta = 1;
  p.eps = 0.5;
  p.lambda0 = 0.2;  // 2 lambda0^{1/2} = 0.89 > delta(1-eps) = 0.5
  EXPECT_THROW(p.validate(), Error);
  p.lambda0 = 1e-4;
  EXPECT_NO_THROW(p.validate());
  EXPECT_NEAR(first_vanishing_time(p), 0.020411, 1e-6);
}

TEST(Constants, MaxSFunctionMatchesBrent) {
  for (double eps : {0.05, 0.2, 0.5, 0.8, 1.0}) {
    auto neg = [eps](double s) { return -std::pow(s, 2 - eps) / (1 + s * s); };
    const auto res = boost::math::tools::brent_find_minima(neg, 1e-6, 1e3, 60);
    EXPECT_NEAR(max_s_function(eps), -res.second, 1e-12) << "eps " << eps;
  }
  EXPECT_NEAR(max_s_function(1e-8), 1.0, 1e-6);
  EXPECT_THROW(max_s_function(0.0), Error);
}

TEST(Constants, DeltaBoundSaturatesTheInequality) {
  for (double mu : {5.0, 20.0, 50.0})
    for (double eps : {0.3, 0.5, 0.7}) {
      const double d = delta_bound(mu, eps);
      double sup = 0;
      for (int k = 0; k <= 200000; ++k) {
        const double s = std::exp(-8 + 16.0 * k / 200000);
        sup = std::max(sup, d * std::pow(s, 2 - eps) / (1 + s * s));
      }
      EXPECT_NEAR(sup - mu * eps / (mu * mu + 1), 0.0, 1e-8);
    }
}

TEST(Constants, ThetaCosBound) {
  EXPECT_LT(theta_cos_bound(1.0, 0.5), 0.0);
  EXPECT_GT(theta_cos_bound(20.0, 0.5), 0.0);
  // cos(2 arctan(1/mu)) = (mu^2-1)/(mu^2+1)
  EXPECT_NEAR(theta_cos_bound(3.0, 0.25), std::cos(2 * std::atan(1 / 3.0)) - 0.8, 1e-15);
}

TEST(Barriers, ClosedFormValues) {
  const auto sub = fixture_subsolution();
  const auto P = sub.path();
  const double t = 0.01, r = 0.3;
  const double expect = 2 * std::atan(r / (lambda_value(P, t) * std::exp(t))) + 2 * std::atan(std::pow(r, 1.5) / (3 * std::exp(t)));
  EXPECT_NEAR(barrier_value(sub, r, t), expect, 1e-14);

  const auto sup = fixture_supersolution();
  EXPECT_NEAR(barrier_value(sup, 1e-12, 0.0), pi, 1e-10);
  EXPECT_NEAR(barrier_value(sup, 1e-14, 0.5), 0.0, 1e-6);
  EXPECT_EQ(barrier_value(sup, 0.0, 0.5), 0.0);
  EXPECT_EQ(barrier_value(sup, 0.0, 0.0), pi);
}

TEST(Barriers, ResidualsMatchFiniteDifferences) {
  std::vector<BarrierSpec> specs{fixture_subsolution(), fixture_supersolution()};
  BarrierSpec b;
  b.family = Family::ShiftedBubblePhiBar;
  b.sigma = 0.3;
  specs.push_back(b);
  b.family = Family::QuadraticCapG;
  specs.push_back(b);
  b.family = Family::SmallBubblePsiStar;
  b.mu_star = 0.2;
  specs.push_back(b);
  b.family = Family::ConePiMinusEpsR;
  specs.push_back(b);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(0, 1);
  for (const auto& s : specs) {
    const double tmax = std::min(1.0, 0.9 * s.t_max());
    for (int k = 0; k < 20; ++k) {
      const double r = 0.02 + 0.95 * U(rng), t = 0.01 + (tmax - 0.02) * U(rng);
      const double fd = residual_fd(s, r, t), ex = barrier_residual(s, r, t);
      EXPECT_NEAR(ex, fd, 1e-5 * (1 + std::abs(fd))) << family_name(s.family) << " r=" << r << " t=" << t;
    }
  }
}

TEST(Barriers, TimeDerivativeMatchesFiniteDifference) {
  for (const auto& s : {fixture_subsolution(), fixture_supersolution()})
    for (double r : {0.01, 0.2, 0.9}) {
      const double t = 0.005, h = 1e-6;
      const double fd = (barrier_value(s, r, t + h) - barrier_value(s, r, t - h)) / (2 * h);
      EXPECT_NEAR(barrier_time_derivative(s, r, t), fd, 1e-6 * (1 + std::abs(fd)));
    }
}

TEST(Barriers, ShippedFixturesCertify) {
  const ScanSettings s;  // 400 x 400
  const auto sub = scan_residual(fixture_subsolution(), Target::subsolution, s);
  EXPECT_GE(sub.margin, -1e-10);
  EXPECT_NEAR(sub.margin, 0.2799, 1e-3);
  const auto sup = scan_residual(fixture_supersolution(), Target::supersolution, s);
  EXPECT_LE(sup.margin, 1e-10);
  BarrierSpec b;
  b.family = Family::ShiftedBubblePhiBar;
  b.sigma = 1.0;
  EXPECT_LE(std::abs(scan_residual(b, Target::subsolution, s).margin), 1e-10);
  EXPECT_LE(std::abs(scan_residual(b, Target::supersolution, s).margin), 1e-10);
}

TEST(Barriers, ScanIsThreadCountIndependent) {
  ScanSettings a, b;
  a.n_r = a.n_t = b.n_r = b.n_t = 120;
  b.threads = 4;
  const auto x = scan_residual(fixture_supersolution(), Target::supersolution, a);
  const auto y = scan_residual(fixture_supersolution(), Target::supersolution, b);
  EXPECT_EQ(x.margin, y.margin);
  EXPECT_EQ(x.r_worst, y.r_worst);
  EXPECT_EQ(x.t_worst, y.t_worst);
}

TEST(Barriers, CertifySearchFindsSupersolution) {
  SearchBox box;
  box.mu = {10, 50, 5};
  box.eps = {0.3, 0.7, 5};
  box.delta_factor = {0.5, 0.5, 1};
  box.delta_relative = true;
  ScanSettings s;
  s.n_r = s.n_t = 60;
  const auto c = certify_parameters(Target::supersolution, box, s);
  EXPECT_LE(c.scan.margin, 0.0);
  EXPECT_GE(theta_cos_bound(c.spec.mu, c.spec.eps), 0.0);
}

TEST(Barriers, CertifyFailsWithMuOne) {
  SearchBox box;
  box.mu = {1, 1, 1};
  box.eps = {0.5, 0.5, 1};
  box.delta_factor = {0.5, 0.5, 1};
  box.delta_relative = true;
  try {
    certify_parameters(Target::supersolution, box, ScanSettings{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::certification);
  }
}

TEST(Barriers, SubsolutionDominatedByInitialData) {
  const auto sub = fixture_subsolution();
  InitialReport rep;
  initial_profile(InitialDataSpec{1.5 * pi, 0.5 * pi, 1e-4}, geometric(2000), &rep, &sub);
  ASSERT_TRUE(rep.dominates_subsolution.has_value());
  EXPECT_TRUE(*rep.dominates_subsolution);
  EXPECT_TRUE(rep.monotone_inner);
  EXPECT_TRUE(rep.monotone_outer);
}

TEST(Barriers, ConeResidualHasTheSubsolutionSign) {
  BarrierSpec b;
  b.family = Family::ConePiMinusEpsR;
  b.slope = 0.1;
  for (double r : {1e-3, 0.1, 0.5, 1.0}) EXPECT_GT(barrier_residual(b, r, 0.0), 0.0);
  // expansion e r (1 - 2e^2/3) for small r
  EXPECT_NEAR(barrier_residual(b, 1e-3, 0.0), 0.1e-3 * (1 - 2 * 0.01 / 3), 1e-12);
}

TEST(Barriers, QuadraticCapAtTheChosenTime) {
  BarrierSpec g;
  g.family = Family::QuadraticCapG;
  g.l = 0.1;
  g.gamma = 1.05;
  const double ts = 0.5 * (g.gamma + std::log(3.0));
  // g(r, t*) = pi - l (t* - gamma) e^{-t*} r - l e^{-2t*} r^2 <= pi - s r with s = l (t* - gamma) e^{-t*}
  const double s = g.l * (ts - g.gamma) * std::exp(-ts);
  for (double r : {0.1, 0.5, 1.0}) EXPECT_LE(barrier_value(g, r, ts), pi - s * r);
  EXPECT_THROW(barrier_value(g, 0.5, 1.2), Error);
}

TEST(Barriers, DomainChecks) {
  EXPECT_THROW(barrier_value(fixture_subsolution(), 1.5, 0.0), Error);
  EXPECT_THROW(barrier_value(fixture_subsolution(), 0.5, 1.0), Error);  // beyond T_lambda
  EXPECT_THROW(barrier_residual(fixture_supersolution(), 0.0, 1.0), Error);
  EXPECT_EQ(family_from_name("QuadraticCapG"), Family::QuadraticCapG);
  EXPECT_THROW(family_from_name("nope"), Error);
}
