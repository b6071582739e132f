#include "picsb/bridge.hpp"

#include <cmath>

#include "picsb/errors.hpp"

namespace picsb {

Field brownian_bridge_sample(const Field& x0, const Field& x1, double tau, double eps, RngStream& rng) {
  if (!x0.same_shape(x1)) throw ConfigError("brownian bridge: endpoint dims differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("brownian bridge: tau must lie in [0, 1]");
  if (eps < 0.0) throw ConfigError("brownian bridge: eps must be >= 0");
  Field out(x0.dims(), x0.axis_tags());
  const double sd = std::sqrt(eps * tau * (1.0 - tau));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - tau) * x0[i] + tau * x1[i];
    if (sd > 0.0) out[i] += sd * rng.normal();
  }
  return out;
}

std::size_t snap_tau(double tau, std::size_t steps) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("snap_tau: tau must lie in [0, 1]");
  const auto t = static_cast<std::size_t>(std::floor(tau * static_cast<double>(steps)));
  return std::min(t, steps - 1);
}

ad::Shape net_shape(const Dims& dims) {
  if (dims.size() == 2) return {1, dims[0], dims[1]};
  if (dims.size() == 3) return {dims[0], dims[1], dims[2]};
  throw ConfigError("net_shape: expected a 2D or 3D state, got " + dims_string(dims));
}

namespace {

void check_start(std::size_t t0, const TrainConfig& cfg) {
  cfg.validate();
  if (t0 >= cfg.steps) {
    throw ConfigError("sample_theta: t0 = " + std::to_string(t0) + " outside [0, " + std::to_string(cfg.steps - 1) + "]");
  }
}

}  // namespace

Field sample_theta(const Field& x_start, std::size_t t0, const ObservationSet& obs, const NetParams& params,
                   const TrainConfig& cfg, RngStream& rng, SampleStats* stats) {
  check_start(t0, cfg);
  if (!x_start.same_shape(obs.mask)) throw ConfigError("sample_theta: state dims differ from observation dims");
  const std::size_t T = cfg.steps;
  const double s = 1.0 / static_cast<double>(T);
  const double noise = std::sqrt(cfg.epsilon * s);
  Field x = project(x_start, obs);
  for (std::size_t t = t0; t < T; ++t) {
    const Field v = net_apply(params, x, static_cast<double>(t) * s);
    if (stats) ++stats->net_evals;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * v[i];
    x = project(x, obs);
    if (stats) ++stats->step_projections;
    if (t + 1 < T)
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += noise * rng.normal();
  }
  if (!x.all_finite()) throw NumericalError("sample_theta: non-finite state");
  return x;
}

ad::Var sample_theta_tape(const NetView& net, ad::Var x_start, std::size_t t0, const ObservationSet& obs,
                          const TrainConfig& cfg, RngStream& rng, SampleStats* stats) {
  check_start(t0, cfg);
  if (x_start.size() != obs.mask.size()) throw ConfigError("sample_theta: state size differs from observation size");
  const std::size_t T = cfg.steps;
  const double s = 1.0 / static_cast<double>(T);
  const double noise = std::sqrt(cfg.epsilon * s);
  const auto mask = obs.mask.values();
  const auto y = obs.values.values();
  ad::Tape* tape = x_start.tape();
  ad::Var x = ad::project(x_start, mask, y);
  for (std::size_t t = t0; t < T; ++t) {
    ad::Var v = net_forward(net, x, static_cast<double>(t) * s);
    if (stats) ++stats->net_evals;
    x = ad::project(ad::add(x, ad::scale(v, s)), mask, y);
    if (stats) ++stats->step_projections;
    if (t + 1 < T) {
      std::vector<double> z(x.size());
      for (auto& e : z) e = noise * rng.normal();
      x = ad::add(x, tape->constant(x.shape(), std::move(z)));
    }
  }
  return x;
}

Field infer(const Field& x0, const ObservationSet& obs, const NetParams& params, const TrainConfig& cfg,
            RngStream& rng) {
  return sample_theta(x0, 0, obs, params, cfg, rng);
}

double adam_step(std::vector<double>& params, std::vector<double> grads, AdamState& state, double lr,
                 double clip_norm) {
  if (grads.size() != params.size()) throw ConfigError("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ConfigError("adam_step: state size mismatch");
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("adam_step: non-finite gradient");
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double c = clip_norm / norm;
    for (auto& g : grads) g *= c;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
  return norm;
}

double bridge_matching_loss(const Field& v_pred, const Field& x_tau, const Field& x1, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("bridge matching loss: tau must lie in [0, 1)");
  if (!v_pred.same_shape(x_tau) || !x_tau.same_shape(x1)) throw ConfigError("bridge matching loss: dims differ");
  double s = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = v_pred[i] - (x1[i] - x_tau[i]) / (1.0 - tau);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(v_pred.size()));
}

}  // namespace picsb
