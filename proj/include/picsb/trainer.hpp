#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "picsb/bridge.hpp"
#include "picsb/config.hpp"
#include "picsb/dataset.hpp"
#include "picsb/net.hpp"
#include "picsb/residual.hpp"

namespace picsb {

struct TrainLogRow {
  std::size_t iter = 0;
  std::size_t refresh_round = 0;
  double loss_rms = 0.0;
  double surrogate_residual_rms = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  NetParams params;
  std::vector<TrainLogRow> log;
  /// Iterations at which the static copy was refreshed.
  std::vector<std::size_t> refresh_iters;
};

/// Residual RMS (or its square) of Sample_theta(x_start, t0) and its
/// gradient with respect to the flat parameters. Noise is replayed from a
/// copy of `noise`, so repeated calls see identical draws.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
LossGrad residual_loss_grad(const NetParams& params, const Field& x_start, std::size_t t0, const ObservationSet& obs,
                            const ResidualOperator& op, const TrainConfig& cfg, const RngStream& noise,
                            bool squared = false);

/// Surrogate-refresh training from (LF, observation) pairs only. Writes
/// metrics.csv, round_NNNN.ckpt per refresh round and final.ckpt to
/// `out_dir` (if non-empty).
TrainResult train_picsb(const ExperimentConfig& cfg, const std::vector<SampleInputs>& data, RngStream& rng,
                        const std::filesystem::path& out_dir, const NetParams* init = nullptr);

/// Loads the train split inputs (lf, mask, obsvals, coef) of a dataset.
std::vector<SampleInputs> load_training_inputs(const std::filesystem::path& benchmark_dir);

/// Builds the HF residual operator for one sample.
std::unique_ptr<ResidualOperator> sample_residual_operator(const ExperimentConfig& cfg, const SampleInputs& s);

/// Central-difference check of residual_loss_grad (squared loss) on a
/// 16x16 Burgers toy with a [4, 8]-channel net.
struct GradProbe {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};
struct GradcheckReport {
  std::vector<GradProbe> probes;
  double max_rel_error = 0.0;
};
GradcheckReport gradcheck_burgers_toy(std::uint64_t seed, std::size_t probes = 20, double h = 1e-5);

}  // namespace picsb
