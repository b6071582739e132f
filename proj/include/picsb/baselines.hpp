#pragma once

#include <array>
#include <optional>
#include <vector>

#include "picsb/config.hpp"
#include "picsb/field.hpp"
#include "picsb/net.hpp"
#include "picsb/observation.hpp"
#include "picsb/residual.hpp"
#include "picsb/rng.hpp"

namespace picsb {

// ---- PINNs ------------------------------------------------------------------

/// Coordinate MLP: `depth` tanh layers of `width`, then a linear output.
struct PinnModel {
  Benchmark benchmark = Benchmark::burgers;
  std::size_t coord_dim = 2;  // physical coordinates fed to the net
  std::size_t feature_dim = 2;
  std::size_t out_dim = 1;
  std::size_t width = 64;
  std::size_t depth = 4;
  std::vector<double> flat;
};

/// (in + 1) w + (depth - 1)(w + 1) w + (w + 1) out.
std::size_t pinn_param_count(std::size_t in_dim, std::size_t width, std::size_t depth, std::size_t out_dim);

PinnModel pinn_init(const ExperimentConfig& cfg, RngStream& rng);

/// Network outputs at coordinates (row-major [N, out_dim]). Coordinates are
/// (xi, gamma) for Burgers, (xi_1, xi_2) for Darcy, (xi_1, xi_2, gamma) for
/// Kolmogorov.
std::vector<double> pinn_predict(const PinnModel& m, const std::vector<std::array<double, 3>>& coords);

/// PDE residual from exact network derivatives at each coordinate.
std::vector<double> pinn_residual(const PinnModel& m, const ExperimentConfig& cfg, const Field* coef,
                                  const std::vector<std::array<double, 3>>& coords);

/// Physical coordinates of every grid node of the state layout.
std::vector<std::array<double, 3>> grid_coords(const ExperimentConfig& cfg);

struct PinnsResult {
  Field prediction;
  PinnModel model;
  std::vector<double> loss_history;
  bool aborted = false;
  double seconds = 0.0;
};

/// Per-instance fit of observation MSE + residual MSE (+ boundary MSE for
/// Darcy) with Adam, fresh collocation points every epoch.
PinnsResult pinns_fit(const ObservationSet& obs, const ExperimentConfig& cfg, const Field* coef, RngStream& rng);

// ---- EDM prior + guidance ------------------------------------------------------

/// sigma_i = (smax^(1/rho) + i/(N-1) (smin^(1/rho) - smax^(1/rho)))^rho.
std::vector<double> karras_sigma_schedule(std::size_t n, double sigma_min, double sigma_max, double rho);

struct EdmPrior {
  NetParams params;
  double sigma_data = 0.5;
};

struct EdmPreconditioning {
  double c_skip, c_out, c_in, c_noise;
};
EdmPreconditioning edm_preconditioning(double sigma, double sigma_data);

/// D(x; sigma) = c_skip x + c_out F(c_in x, c_noise).
Field edm_denoise(const EdmPrior& prior, const Field& x, double sigma);

struct EdmTrainResult {
  EdmPrior prior;
  std::vector<double> loss_log;
};

/// Denoising score matching on LF fields only (lognormal sigma).
EdmTrainResult train_edm_prior(const std::vector<Field>& lf_fields, const ExperimentConfig& cfg, RngStream& rng,
                               const NetParams* init = nullptr);

void save_edm_prior(const EdmPrior& prior, const std::filesystem::path& path);
EdmPrior load_edm_prior(const std::filesystem::path& path);

struct GuidanceTrace {
  /// ||M (x - y)||^2 after each step.
  std::vector<double> obs_loss;
};

/// Heun EDM sampling with observation guidance throughout and physics
/// guidance after `switch_fraction` of the steps. `op` may be null.
Field guidance_sample(const EdmPrior& prior, const ObservationSet& obs, const ResidualOperator* op,
                      const GuidanceConfig& cfg, RngStream& rng, GuidanceTrace* trace = nullptr);

}  // namespace picsb
