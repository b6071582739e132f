#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "picsb/config.hpp"
#include "picsb/field.hpp"
#include "picsb/rng.hpp"

namespace test {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("picsb_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline picsb::Field random_field(const picsb::Dims& dims, std::uint64_t seed, double scale = 1.0) {
  picsb::RngStream r(seed, 99);
  picsb::Field f(dims);
  for (auto& v : f.values()) v = scale * r.normal();
  return f;
}

/// Small Burgers experiment: nx x nt grid, tiny [4, 8] net.
inline picsb::ExperimentConfig burgers_toy(std::size_t nx = 16, std::size_t nt = 16) {
  auto cfg = picsb::default_config(picsb::Benchmark::burgers);
  cfg.solver.burgers.nx = nx;
  cfg.solver.burgers.nt = nt;
  cfg.dims = {nx, nt};
  cfg.frames = nt;
  cfg.net.enc = {4, 8};
  cfg.net.dec = {8, 4};
  return cfg;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

constexpr double kPi = std::numbers::pi;

}  // namespace test
