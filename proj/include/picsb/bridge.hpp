#pragma once

#include <cstddef>
#include <vector>

#include "picsb/ad.hpp"
#include "picsb/config.hpp"
#include "picsb/field.hpp"
#include "picsb/net.hpp"
#include "picsb/observation.hpp"
#include "picsb/rng.hpp"

namespace picsb {

/// A state on the bridge-time grid tau_t = t / T.
struct BridgeState {
  Field x;
  std::size_t t = 0;
  std::size_t T = 10;
  double tau() const { return static_cast<double>(t) / static_cast<double>(T); }
};

/// (1 - tau) x0 + tau x1 + sqrt(eps tau (1 - tau)) z.
Field brownian_bridge_sample(const Field& x0, const Field& x1, double tau, double eps, RngStream& rng);

/// Grid index for a uniform draw: floor(tau T) clamped to T - 1.
std::size_t snap_tau(double tau, std::size_t steps);

/// Network tensor shape for a state: [H, W] -> [1, H, W]; [C, H, W] as is.
ad::Shape net_shape(const Dims& dims);

struct SampleStats {
  std::size_t net_evals = 0;
  /// Projections applied after each Euler step (the initial one excluded).
  std::size_t step_projections = 0;
};

/// Hard-conditioned sampler from step t0: x <- P(x_start); for t < T - 1:
/// x <- P(x + s v(x, tau_t)) + sqrt(eps s) z; last step without noise.
Field sample_theta(const Field& x_start, std::size_t t0, const ObservationSet& obs, const NetParams& params,
                   const TrainConfig& cfg, RngStream& rng, SampleStats* stats = nullptr);

/// Same chain recorded on a tape; `x_start` is a constant of the net tape.
/// Noise comes from `rng`, so a copied stream replays the same draws.
ad::Var sample_theta_tape(const NetView& net, ad::Var x_start, std::size_t t0, const ObservationSet& obs,
                          const TrainConfig& cfg, RngStream& rng, SampleStats* stats = nullptr);

/// sample_theta from t0 = 0.
Field infer(const Field& x0, const ObservationSet& obs, const NetParams& params, const TrainConfig& cfg,
            RngStream& rng);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// Clips g to global norm `clip_norm` (no clip when <= 0), then one Adam
/// step (beta1 0.9, beta2 0.999, eps 1e-8). Returns the pre-clip norm.
double adam_step(std::vector<double>& params, std::vector<double> grads, AdamState& state, double lr,
                 double clip_norm);

/// RMS of v_pred - (x1 - x_tau) / (1 - tau).
double bridge_matching_loss(const Field& v_pred, const Field& x_tau, const Field& x1, double tau);

}  // namespace picsb
