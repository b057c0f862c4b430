#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "bubbleflow/branching.hpp"

namespace test_support {

using namespace bubbleflow;

inline GridPtr geometric(int N, double r_min = 1e-10) {
  return std::make_shared<const RadialGrid>(build_geometric_grid(N, r_min));
}

inline GridPtr power(int N, double q = 2.0) { return std::make_shared<const RadialGrid>(build_grid(N, q)); }

/// The default scenario on a coarse grid.
inline Scenario coarse_scenario(int N = 500) {
  Scenario sc;
  sc.grid = geometric(N);
  sc.init = InitialDataSpec{1.5 * pi, 0.5 * pi, 1e-4};
  sc.solver.dt_min = 1e-24;
  sc.tau_offsets = {0.0, 0.5};
  return sc;
}

/// One shared construction per test binary; computed on first use.
inline const Construction& coarse_construction() {
  static std::once_flag once;
  static std::unique_ptr<Construction> c;
  std::call_once(once, [] { c = std::make_unique<Construction>(orchestrate(coarse_scenario())); });
  return *c;
}

inline BarrierSpec fixture_subsolution() {
  BarrierSpec b;
  b.family = Family::SubsolutionPhi;
  b.delta = 1;
  b.eps = 0.5;
  b.mu = 3;
  b.lambda0 = 1e-4;
  return b;
}

inline BarrierSpec fixture_supersolution() {
  BarrierSpec b;
  b.family = Family::SupersolutionPsi;
  b.mu = 20;
  b.eps = 0.5;
  b.delta = 0.5 * delta_bound(20, 0.5);
  return b;
}

/// Rounds to a multiple of 2^-40 so that adding pi (a multiple of 2^-48) is exact.
inline double quantize(double v) { return std::ldexp(std::round(std::ldexp(v, 40)), -40); }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bubbleflow_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace test_support
