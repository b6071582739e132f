#include <cmath>
#include <numeric>

#include "json.hpp"
#include "picsb/baselines.hpp"
#include "picsb/bridge.hpp"
#include "picsb/errors.hpp"

namespace picsb {

namespace {

// Largest observation contraction per step.
constexpr double kObsCap = 0.5;

double norm2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

double obs_loss(const Field& x, const ObservationSet& obs) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = obs.mask[i] * (x[i] - obs.values[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<double> karras_sigma_schedule(std::size_t n, double sigma_min, double sigma_max, double rho) {
  if (n < 2) throw ConfigError("karras schedule needs at least 2 steps");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !(rho > 0.0)) throw ConfigError("karras schedule: bad sigma range");
  const double a = std::pow(sigma_max, 1.0 / rho), b = std::pow(sigma_min, 1.0 / rho);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::pow(a + static_cast<double>(i) / static_cast<double>(n - 1) * (b - a), rho);
  return s;
}

EdmPreconditioning edm_preconditioning(double sigma, double sigma_data) {
  const double s2 = sigma * sigma + sigma_data * sigma_data;
  return {sigma_data * sigma_data / s2, sigma * sigma_data / std::sqrt(s2), 1.0 / std::sqrt(s2), std::log(sigma) / 4.0};
}

Field edm_denoise(const EdmPrior& prior, const Field& x, double sigma) {
  const auto c = edm_preconditioning(sigma, prior.sigma_data);
  Field xin = x;
  for (auto& v : xin.values()) v *= c.c_in;
  const Field f = net_apply(prior.params, xin, c.c_noise);
  Field out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.c_skip * x[i] + c.c_out * f[i];
  return out;
}

EdmTrainResult train_edm_prior(const std::vector<Field>& lf_fields, const ExperimentConfig& cfg, RngStream& rng,
                               const NetParams* init) {
  const auto& gc = cfg.baselines.guidance;
  gc.validate();
  if (lf_fields.empty()) throw ConfigError("edm prior: no training fields");
  EdmTrainResult res;
  if (init) {
    if (init->flat.size() != param_count(cfg.net)) throw ConfigError("edm prior: initial checkpoint does not match net config");
    res.prior.params = *init;
  } else {
    RngStream init_rng = rng.fork("init");
    res.prior.params = init_params(cfg.net, init_rng);
  }
  // Empirical std of the LF training fields.
  double sum = 0.0, sumsq = 0.0;
  std::size_t count = 0;
  for (const auto& f : lf_fields) {
    for (double v : f.values()) sum += v, sumsq += v * v;
    count += f.size();
  }
  const double mean = sum / static_cast<double>(count);
  const double sd = std::sqrt(std::max(0.0, sumsq / static_cast<double>(count) - mean * mean));
  res.prior.sigma_data = sd > 0.0 ? sd : gc.sigma_data;

  AdamState adam;
  const std::size_t B = gc.prior_batch;
  for (std::size_t it = 0; it < gc.prior_iterations; ++it) {
    RngStream it_rng = rng.fork("iter", it);
    std::vector<double> grad(res.prior.params.flat.size(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      RngStream br = it_rng.fork("batch", b);
      const Field& y = lf_fields[br.uniform_index(lf_fields.size())];
      const double sigma = std::exp(gc.p_mean + gc.p_std * br.normal());
      const auto c = edm_preconditioning(sigma, res.prior.sigma_data);
      std::vector<double> xin(y.size()), target(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double x = y[i] + sigma * br.normal();
        xin[i] = c.c_in * x;
        target[i] = -(y[i] - c.c_skip * x) / c.c_out;
      }
      ad::Tape tape;
      ad::Var flat = tape.leaf({res.prior.params.flat.size()}, res.prior.params.flat);
      NetView view(res.prior.params, flat);
      ad::Var f = net_forward(view, tape.constant(net_shape(y.dims()), std::move(xin)), c.c_noise);
      ad::Var loss = ad::mean(ad::square(ad::add_const(f, target)));
      tape.backward(loss);
      loss_sum += loss.scalar();
      const auto g = tape.grad(flat);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    }
    const double loss = loss_sum / static_cast<double>(B);
    if (!std::isfinite(loss)) throw NumericalError("edm prior: non-finite loss at iteration " + std::to_string(it));
    for (auto& g : grad) g /= static_cast<double>(B);
    adam_step(res.prior.params.flat, std::move(grad), adam, gc.prior_lr, cfg.trainer.clip_norm);
    res.loss_log.push_back(loss);
  }
  return res;
}

void save_edm_prior(const EdmPrior& prior, const std::filesystem::path& path) {
  nlohmann::json extra{{"kind", "edm"}, {"sigma_data", prior.sigma_data}};
  save_checkpoint(Checkpoint{prior.params, 0, 0, 0, 0, extra.dump()}, path);
}

EdmPrior load_edm_prior(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  nlohmann::json extra;
  try {
    extra = nlohmann::json::parse(c.extra);
  } catch (const nlohmann::json::exception&) {
    throw IoError(path.string() + ": malformed checkpoint metadata");
  }
  if (extra.value("kind", "") != "edm") throw ConfigError(path.string() + ": not an EDM prior checkpoint");
  return EdmPrior{std::move(c.params), extra.value("sigma_data", 0.5)};
}

Field guidance_sample(const EdmPrior& prior, const ObservationSet& obs, const ResidualOperator* op,
                      const GuidanceConfig& cfg, RngStream& rng, GuidanceTrace* trace) {
  cfg.validate();
  const auto sig = karras_sigma_schedule(cfg.steps, cfg.sigma_min, cfg.sigma_max, cfg.rho);
  const std::size_t N = sig.size();
  const std::size_t switch_step = static_cast<std::size_t>(std::floor(cfg.switch_fraction * static_cast<double>(N)));
  const auto* darcy = dynamic_cast<const DarcyResidual*>(op);

  Field x(obs.dims(), obs.mask.axis_tags());
  for (auto& v : x.values()) v = sig[0] * rng.normal();

  for (std::size_t i = 0; i < N; ++i) {
    const double s = sig[i];
    const double sn = i + 1 < N ? sig[i + 1] : 0.0;
    const Field D = edm_denoise(prior, x, s);
    std::vector<double> d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) d[k] = (x[k] - D[k]) / s;
    Field xn = x;
    for (std::size_t k = 0; k < x.size(); ++k) xn[k] = x[k] + (sn - s) * d[k];
    if (sn > 0.0) {
      const Field D2 = edm_denoise(prior, xn, sn);
      for (std::size_t k = 0; k < x.size(); ++k) xn[k] = x[k] + (sn - s) * 0.5 * (d[k] + (xn[k] - D2[k]) / sn);
    }
    x = std::move(xn);

    const bool late = i >= switch_step;
    if (late && op && cfg.lambda_phys > 0.0) {
      const ResidualField r = op->evaluate(x);
      const double cnt = static_cast<double>(std::max<std::size_t>(1, r.valid_count()));
      std::vector<double> g(r.values.size(), 0.0);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (r.valid[k] != 0.0) g[k] = 2.0 * r.values[k] / cnt;
      std::vector<double> step = op->vjp(x, g);
      for (auto& v : step) v *= cfg.lambda_phys;
      const double cap = cfg.max_step_ratio * norm2(x.values());
      const double sn2 = norm2(step);
      const double f = sn2 > cap && sn2 > 0.0 ? cap / sn2 : 1.0;
      for (std::size_t k = 0; k < x.size(); ++k) x[k] -= f * step[k];
    }
    if (late && darcy && cfg.lambda_bc > 0.0) {
      const std::size_t n = x.dims()[0], m = x.dims()[1];
      const double c = std::min(2.0 * cfg.lambda_bc, 1.0);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b)
          if (a == 0 || b == 0 || a + 1 == n || b + 1 == m) x[a * m + b] *= 1.0 - c;
    }
    if (cfg.lambda_obs > 0.0) {
      const double c = std::min(2.0 * cfg.lambda_obs, kObsCap);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] -= c * obs.mask[k] * (x[k] - obs.values[k]);
    }
    if (!x.all_finite()) throw NumericalError("guidance: non-finite state at step " + std::to_string(i));
    if (trace) trace->obs_loss.push_back(obs_loss(x, obs));
  }
  return x;
}

}  // namespace picsb
