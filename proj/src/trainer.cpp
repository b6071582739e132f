#include "picsb/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <algorithm>

#include "picsb/errors.hpp"

namespace picsb {

namespace {

std::string round_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%04zu.ckpt", r);
  return buf;
}

void write_ckpt(const NetParams& p, std::size_t step, const RngStream& rng, const std::filesystem::path& path) {
  Checkpoint c{p, step, rng.seed(), rng.stream_id(), rng.counter(), "{\"kind\":\"picsb\"}"};
  save_checkpoint(c, path);
}

}  // namespace

LossGrad residual_loss_grad(const NetParams& params, const Field& x_start, std::size_t t0, const ObservationSet& obs,
                            const ResidualOperator& op, const TrainConfig& cfg, const RngStream& noise,
                            bool squared) {
  ad::Tape tape;
  ad::Var flat = tape.leaf({params.flat.size()}, params.flat);
  NetView view(params, flat);
  ad::Var x = tape.constant(net_shape(x_start.dims()), x_start.data());
  RngStream rng = noise;
  ad::Var xhat = sample_theta_tape(view, x, t0, obs, cfg, rng);
  ad::Var loss = residual_rms(xhat, op);
  if (squared) loss = ad::square(loss);
  tape.backward(loss);
  return LossGrad{loss.scalar(), tape.grad(flat)};
}

std::unique_ptr<ResidualOperator> sample_residual_operator(const ExperimentConfig& cfg, const SampleInputs& s) {
  return make_residual_operator(cfg, s.coef ? &*s.coef : nullptr);
}

std::vector<SampleInputs> load_training_inputs(const std::filesystem::path& benchmark_dir) {
  std::vector<SampleInputs> out;
  for (const auto& d : list_samples(benchmark_dir, "train")) out.push_back(load_sample_inputs(d));
  if (out.empty()) throw IoError("no training samples under " + benchmark_dir.string());
  return out;
}

TrainResult train_picsb(const ExperimentConfig& cfg, const std::vector<SampleInputs>& data, RngStream& rng,
                        const std::filesystem::path& out_dir, const NetParams* init) {
  cfg.validate();
  const TrainConfig& tc = cfg.trainer;
  if (data.empty()) throw ConfigError("train: empty dataset");
  for (const auto& s : data) {
    if (s.lf.dims() != cfg.dims) {
      throw ConfigError("train: sample " + s.id + " has dims " + dims_string(s.lf.dims()) + " but " +
                        to_string(cfg.benchmark) + " config expects " + dims_string(cfg.dims));
    }
    if (cfg.benchmark == Benchmark::darcy && !s.coef) throw ConfigError("train: darcy sample " + s.id + " lacks coef.fgrd");
  }
  std::vector<std::unique_ptr<ResidualOperator>> ops;
  for (const auto& s : data) ops.push_back(sample_residual_operator(cfg, s));

  TrainResult res;
  if (init) {
    if (init->flat.size() != param_count(cfg.net)) throw ConfigError("train: initial checkpoint does not match net config");
    res.params = *init;
  } else {
    RngStream init_rng = rng.fork("init");
    res.params = init_params(cfg.net, init_rng);
  }

  const bool write = !out_dir.empty();
  std::ofstream csv;
  if (write) {
    std::filesystem::create_directories(out_dir);
    save_config(cfg, out_dir / "config.json");
    csv.open(out_dir / "metrics.csv");
    if (!csv) throw IoError("cannot write " + (out_dir / "metrics.csv").string());
    csv << "iter,refresh_round,loss_rms,surrogate_residual_rms,seconds\n";
  }

  AdamState adam;
  NetParams frozen = res.params;
  const auto start = std::chrono::steady_clock::now();
  const std::size_t T = tc.steps;
  const std::size_t B = tc.batch_size;

  for (std::size_t it = 0; it < tc.iterations; ++it) {
    const std::size_t round = it / tc.refresh_period;
    if (it % tc.refresh_period == 0) {
      frozen = res.params;
      res.refresh_iters.push_back(it);
    }
    RngStream it_rng = rng.fork("iter", it);
    std::vector<double> grad(res.params.flat.size(), 0.0);
    double loss_sum = 0.0, surr_sum = 0.0;
    auto abort = [&](const std::string& why) {
      std::string where;
      if (write) {
        write_ckpt(res.params, it, rng, out_dir / "last_good.ckpt");
        where = "; last good checkpoint at " + (out_dir / "last_good.ckpt").string();
      }
      throw NumericalError("train: " + why + " at iteration " + std::to_string(it) + where);
    };
    try {
      for (std::size_t b = 0; b < B; ++b) {
        RngStream brng = it_rng.fork("batch", b);
        const std::size_t k = brng.uniform_index(data.size());
        const SampleInputs& s = data[k];
        RngStream surr_rng = brng.fork("surrogate");
        const Field x1 = sample_theta(s.lf, 0, s.obs, frozen, tc, surr_rng);
        surr_sum += residual_norm(ops[k]->evaluate(x1));
        const std::size_t t = snap_tau(brng.uniform(), T);
        const double tau = static_cast<double>(t) / static_cast<double>(T);
        RngStream bb_rng = brng.fork("bridge");
        const Field xt = project(brownian_bridge_sample(s.lf, x1, tau, tc.epsilon, bb_rng), s.obs);
        const LossGrad lg = residual_loss_grad(res.params, xt, t, s.obs, *ops[k], tc, brng.fork("recon"));
        loss_sum += lg.loss;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lg.grad[i];
      }
    } catch (const NumericalError& e) {
      abort(e.what());
    }
    const double loss = loss_sum / static_cast<double>(B);
    bool finite = std::isfinite(loss);
    for (auto& g : grad) {
      g /= static_cast<double>(B);
      finite = finite && std::isfinite(g);
    }
    if (!finite) abort("non-finite loss");
    adam_step(res.params.flat, std::move(grad), adam, tc.lr, tc.clip_norm);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    TrainLogRow row{it, round, loss, surr_sum / static_cast<double>(B), secs};
    res.log.push_back(row);
    if (write) {
      char line[256];
      std::snprintf(line, sizeof line, "%zu,%zu,%.17g,%.17g,%.6f\n", row.iter, row.refresh_round, row.loss_rms,
                    row.surrogate_residual_rms, row.seconds);
      csv << line << std::flush;
      const bool round_end = (it + 1) % tc.refresh_period == 0 || it + 1 == tc.iterations;
      if (round_end) write_ckpt(res.params, it + 1, rng, out_dir / round_name(round));
    }
  }
  if (write) write_ckpt(res.params, tc.iterations, rng, out_dir / "final.ckpt");
  return res;
}

GradcheckReport gradcheck_burgers_toy(std::uint64_t seed, std::size_t probes, double h) {
  ExperimentConfig cfg = default_config(Benchmark::burgers);
  cfg.solver.burgers.nx = cfg.solver.burgers.nt = 16;
  cfg.dims = {16, 16};
  cfg.frames = 16;
  cfg.net.enc = {4, 8};
  cfg.net.dec = {8, 4};
  cfg.trainer.steps = 4;
  cfg.validate();
  RngStream rng(seed, 0);
  RngStream prng = rng.fork("params");
  const NetParams params = init_params(cfg.net, prng);
  RngStream frng = rng.fork("field");
  Field x(cfg.dims, frng.normals(16 * 16), Tags{"x", "t"});
  RngStream mrng = rng.fork("mask");
  const Field mask = sample_mask(Regime::R1, 0.25, cfg.geometry(), mrng);
  const ObservationSet obs = observe(x, mask);
  for (auto& v : x.values()) v += 0.1 * frng.normal();
  const auto op = make_residual_operator(cfg);
  const RngStream noise = rng.fork("noise");
  const std::size_t t0 = rng.uniform_index(cfg.trainer.steps);

  const LossGrad base = residual_loss_grad(params, x, t0, obs, *op, cfg.trainer, noise, true);
  GradcheckReport rep;
  NetParams p = params;
  for (std::size_t k = 0; k < probes; ++k) {
    const std::size_t i = rng.uniform_index(p.flat.size());
    const double v = p.flat[i];
    p.flat[i] = v + h;
    const double lp = residual_loss_grad(p, x, t0, obs, *op, cfg.trainer, noise, true).loss;
    p.flat[i] = v - h;
    const double lm = residual_loss_grad(p, x, t0, obs, *op, cfg.trainer, noise, true).loss;
    p.flat[i] = v;
    GradProbe g{i, base.grad[i], (lp - lm) / (2.0 * h), 0.0};
    // Floor covers parameters the loss is invariant to (conv bias before
    // instance norm), where the difference quotient is pure roundoff.
    const double scale = std::max({std::abs(g.analytic), std::abs(g.numeric), 1e-3});
    g.rel_error = std::abs(g.analytic - g.numeric) / scale;
    rep.max_rel_error = std::max(rep.max_rel_error, g.rel_error);
    rep.probes.push_back(g);
  }
  return rep;
}

}  // namespace picsb
