#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "picsb/field.hpp"
#include "picsb/observation.hpp"
#include "picsb/pde.hpp"

namespace picsb {

enum class Benchmark { burgers, darcy, kolmogorov };

Benchmark parse_benchmark(const std::string& s);
std::string to_string(Benchmark b);

struct SolverConfig {
  BurgersSpec burgers;
  DarcySpec darcy;
  KolmogorovSpec kolmogorov;
};

/// Velocity network shape.
struct NetConfig {
  std::size_t in_channels = 1;
  std::vector<std::size_t> enc = {16, 32};
  std::vector<std::size_t> dec = {32, 16};
  std::size_t kernel = 3;
  std::size_t d_cond = 8;
  std::size_t time_hidden = 16;
  double norm_eps = 1e-5;
  /// "circular", "reflect" or "zero".
  std::string padding = "circular";

  void validate() const;
};

/// Bridge sampler and surrogate-refresh trainer settings.
struct TrainConfig {
  std::size_t steps = 10;  // T
  double epsilon = 1e-2;
  std::size_t refresh_period = 100;  // C
  std::size_t iterations = 1000;
  double lr = 1e-3;
  double clip_norm = 1.0;
  std::size_t batch_size = 4;

  std::size_t refresh_rounds() const { return (iterations + refresh_period - 1) / refresh_period; }
  void validate() const;
};

struct PinnsConfig {
  std::size_t width = 64;
  std::size_t depth = 4;
  std::size_t colloc = 1024;
  double lambda_obs = 1.0;
  double lambda_phys = 1.0;
  double lambda_bc = 1.0;
  std::size_t n_bc = 256;
  double lr = 1e-3;
  std::size_t epochs = 2000;
  /// Global-norm gradient clip; 0 disables.
  double grad_clip = 0.0;

  void validate() const;
};

struct GuidanceConfig {
  std::size_t steps = 200;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  double lambda_obs = 320.0;
  double lambda_phys = 100.0;
  double lambda_bc = 0.0;
  double switch_fraction = 0.8;
  /// Largest allowed guidance step relative to the state norm.
  double max_step_ratio = 0.1;
  // Prior (EDM denoiser) training.
  std::size_t prior_iterations = 1000;
  double prior_lr = 1e-3;
  std::size_t prior_batch = 4;
  double sigma_data = 0.5;
  double p_mean = -1.2;
  double p_std = 1.2;

  void validate() const;
};

struct BaselineConfig {
  PinnsConfig pinns;
  GuidanceConfig guidance;
};

/// Single source of truth for a run; serialized next to every artifact.
struct ExperimentConfig {
  Benchmark benchmark = Benchmark::burgers;
  Dims dims = {32, 32};
  std::size_t frames = 32;
  Regime regime = Regime::R1;
  double ratio = 0.1;
  SolverConfig solver;
  TrainConfig trainer;
  NetConfig net;
  BaselineConfig baselines;
  std::uint64_t seed = 0;
  std::size_t n_train = 32;
  std::size_t n_test = 4;

  /// Mask layout: Burgers frames along its time axis, Kolmogorov along axis 0.
  MaskGeometry geometry() const;
  /// Whether the spatial domain is periodic.
  bool periodic() const { return benchmark != Benchmark::darcy; }
  void validate() const;
};

/// Desk-scale ("desk") or paper-table ("paper") defaults for a benchmark.
ExperimentConfig default_config(Benchmark b, const std::string& profile = "desk");

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

std::string net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const std::string& text);

}  // namespace picsb
