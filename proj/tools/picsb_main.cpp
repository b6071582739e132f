#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "picsb/baselines.hpp"
#include "picsb/bridge.hpp"
#include "picsb/config.hpp"
#include "picsb/dataset.hpp"
#include "picsb/errors.hpp"
#include "picsb/metrics.hpp"
#include "picsb/plot.hpp"
#include "picsb/residual.hpp"
#include "picsb/trainer.hpp"

using namespace picsb;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  double noise_alpha = 0.0;
};

// Explicit --config, else the dataset's config.json, else benchmark defaults.
ExperimentConfig resolve_config(const Globals& g, const std::optional<fs::path>& data_dir, std::optional<Benchmark> b) {
  ExperimentConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config(g.config);
  } else if (data_dir && fs::exists(*data_dir / "config.json")) {
    cfg = load_config(*data_dir / "config.json");
  } else if (b) {
    cfg = default_config(*b);
  } else {
    throw ConfigError("no config: pass --config");
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

// Locates the benchmark directory of a dataset root without knowing the benchmark.
fs::path find_benchmark_dir(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) return dir;
  for (const char* b : {"burgers", "darcy", "kolmogorov"}) {
    for (const fs::path& c : {dir / b, dir / "data" / b})
      if (fs::exists(c / "manifest.json")) return c;
  }
  throw IoError("no dataset (manifest.json) under " + dir.string());
}

fs::path sample_benchmark_dir(const fs::path& sample_dir) { return sample_dir.parent_path().parent_path(); }

// Observations (optionally noisy) and matching LF input for one sample.
SampleInputs prepare_inputs(const ExperimentConfig& cfg, const fs::path& sample_dir, double alpha, double data_std) {
  SampleInputs s = load_sample_inputs(sample_dir);
  if (alpha > 0.0) {
    RngStream nr = RngStream(cfg.seed, 0).fork("noise").fork(s.id);
    s.obs = perturb_observations(s.obs, alpha, data_std, nr);
    s.lf = rebuild_lf(cfg, s.lf, s.obs);
  }
  return s;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed conditional Schrodinger bridge reconstruction"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--config", g.config, "Experiment config JSON");
  app.add_option("--noise-alpha", g.noise_alpha, "Observation noise level (fraction of data std)")->check(CLI::NonNegativeNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate an LF/HF/observation dataset");
  std::string gen_bench = "burgers", gen_profile = "desk", gen_out, gen_regime;
  std::optional<std::size_t> gen_ntrain, gen_ntest;
  gen->add_option("--benchmark", gen_bench, "burgers|darcy|kolmogorov");
  gen->add_option("--profile", gen_profile, "desk|paper defaults when no --config is given");
  gen->add_option("--out", gen_out, "Output root")->required();
  gen->add_option("--regime", gen_regime, "R1|R2|R3");
  gen->add_option("--n-train", gen_ntrain);
  gen->add_option("--n-test", gen_ntest);

  // train
  auto* train = app.add_subcommand("train", "Train the bridge model from LF and observations only");
  std::string tr_data, tr_out, tr_init;
  train->add_option("--data", tr_data, "Dataset root or benchmark dir")->required();
  train->add_option("--out", tr_out, "Checkpoint directory")->required();
  train->add_option("--init-ckpt", tr_init, "Warm-start checkpoint");

  // infer
  auto* inf = app.add_subcommand("infer", "Reconstruct every sample of a split");
  std::string in_ckpt, in_data, in_out, in_split = "test";
  inf->add_option("--ckpt", in_ckpt)->required();
  inf->add_option("--data", in_data)->required();
  inf->add_option("--out", in_out, "Prediction directory")->required();
  inf->add_option("--split", in_split);

  // eval
  auto* ev = app.add_subcommand("eval", "Score predictions against HF references");
  std::string ev_pred, ev_data, ev_out, ev_bench;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--benchmark", ev_bench);
  ev->add_option("--out", ev_out, "Metrics CSV");

  // baseline
  auto* base = app.add_subcommand("baseline", "Comparison methods");
  base->require_subcommand(1);
  auto* pinns = base->add_subcommand("pinns", "Per-instance PINN fit");
  std::string bp_sample, bp_out;
  pinns->add_option("--sample", bp_sample)->required();
  pinns->add_option("--out", bp_out)->required();
  auto* prior = base->add_subcommand("train-prior", "Train the EDM prior on LF fields");
  std::string pr_data, pr_out;
  prior->add_option("--data", pr_data)->required();
  prior->add_option("--out", pr_out, "Prior checkpoint")->required();
  auto* guid = base->add_subcommand("guidance", "Guided EDM sampling");
  std::string bg_prior, bg_sample, bg_out;
  guid->add_option("--prior", bg_prior)->required();
  guid->add_option("--sample", bg_sample)->required();
  guid->add_option("--out", bg_out)->required();

  // plot
  auto* plot = app.add_subcommand("plot", "Heatmap PNG of one or more fields");
  std::vector<std::string> pl_fields;
  std::string pl_out;
  std::optional<std::size_t> pl_frame;
  bool pl_sym = false;
  std::size_t pl_scale = 4;
  plot->add_option("--field", pl_fields, "Field file(s); several are drawn side by side")->required();
  plot->add_option("--frame", pl_frame);
  plot->add_flag("--symmetric", pl_sym, "Color range symmetric about zero");
  plot->add_option("--scale", pl_scale, "Pixels per node");
  plot->add_option("--out", pl_out)->required();

  // check
  auto* check = app.add_subcommand("check", "Diagnostics");
  check->require_subcommand(1);
  auto* cres = check->add_subcommand("residual", "Residual RMS and max of a field");
  std::string cr_field, cr_bench, cr_coef;
  cres->add_option("--field", cr_field)->required();
  cres->add_option("--benchmark", cr_bench)->required();
  cres->add_option("--coef", cr_coef, "Darcy permeability");
  auto* cfl = check->add_subcommand("floor", "Residual floor estimate for a sample");
  std::string cf_sample;
  std::size_t cf_iters = 500;
  double cf_step = 1e-3;
  cfl->add_option("--sample", cf_sample)->required();
  cfl->add_option("--iters", cf_iters);
  cfl->add_option("--step", cf_step);
  auto* cgc = check->add_subcommand("gradcheck", "Finite-difference check of the training gradient");
  std::size_t gc_probes = 20;
  cgc->add_option("--probes", gc_probes);

  // bench
  auto* bench = app.add_subcommand("bench", "Median inference wall time per sample");
  std::string bn_ckpt, bn_data;
  std::size_t bn_reps = 5;
  bench->add_option("--ckpt", bn_ckpt)->required();
  bench->add_option("--data", bn_data)->required();
  bench->add_option("--reps", bn_reps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      ExperimentConfig cfg = g.config.empty() ? default_config(parse_benchmark(gen_bench), gen_profile) : load_config(g.config);
      if (g.seed) cfg.seed = *g.seed;
      if (!gen_regime.empty()) cfg.regime = parse_regime(gen_regime);
      if (gen_ntrain) cfg.n_train = *gen_ntrain;
      if (gen_ntest) cfg.n_test = *gen_ntest;
      const auto m = gen_dataset(cfg, gen_out);
      print_json({{"root", m.root.string()}, {"samples", m.samples.size()}, {"data_std", m.data_std}});
    } else if (*train) {
      const fs::path bdir = find_benchmark_dir(tr_data);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      const auto data = load_training_inputs(bdir);
      std::optional<NetParams> init;
      if (!tr_init.empty()) init = load_checkpoint(tr_init).params;
      RngStream rng(cfg.seed, 1);
      const auto res = train_picsb(cfg, data, rng, tr_out, init ? &*init : nullptr);
      print_json({{"iterations", res.log.size()}, {"final_loss_rms", res.log.empty() ? 0.0 : res.log.back().loss_rms},
                  {"checkpoint", (fs::path(tr_out) / "final.ckpt").string()}});
    } else if (*inf) {
      const fs::path bdir = find_benchmark_dir(in_data);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      const double data_std = load_manifest(bdir).data_std;
      const Checkpoint ck = load_checkpoint(in_ckpt);
      fs::create_directories(in_out);
      RunInfo info;
      info.noise_alpha = g.noise_alpha;
      const auto samples = list_samples(bdir, in_split);
      if (samples.empty()) throw IoError("no " + in_split + " samples under " + bdir.string());
      for (const auto& sd : samples) {
        const SampleInputs s = prepare_inputs(cfg, sd, g.noise_alpha, data_std);
        RngStream rng = RngStream(cfg.seed, 2).fork(s.id);
        const auto t0 = std::chrono::steady_clock::now();
        const Field x = infer(s.lf, s.obs, ck.params, cfg.trainer, rng);
        info.seconds[s.id] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        field_write(x, fs::path(in_out) / (s.id + ".fgrd"));
      }
      write_run_info(info, in_out);
      print_json({{"predictions", samples.size()}, {"out", in_out}});
    } else if (*ev) {
      const fs::path bdir = find_benchmark_dir(ev_data);
      const Benchmark b = ev_bench.empty() ? load_manifest(bdir).benchmark : parse_benchmark(ev_bench);
      if (app.get_option("--noise-alpha")->count() > 0) {
        RunInfo info = read_run_info(ev_pred);
        info.noise_alpha = g.noise_alpha;
        write_run_info(info, ev_pred);
      }
      const auto sum = eval_run(ev_pred, bdir, b, ev_out);
      std::cout << kMetricsHeader << "\n";
      for (const auto& r : sum.rows) std::cout << metrics_csv_line(r) << "\n";
      std::cout << metrics_csv_line(sum.mean) << "\n";
    } else if (*pinns) {
      const fs::path bdir = sample_benchmark_dir(bp_sample);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      const SampleInputs s = prepare_inputs(cfg, bp_sample, g.noise_alpha, load_manifest(bdir).data_std);
      RngStream rng = RngStream(cfg.seed, 3).fork(s.id);
      const auto res = pinns_fit(s.obs, cfg, s.coef ? &*s.coef : nullptr, rng);
      field_write(res.prediction, bp_out);
      print_json({{"seconds", res.seconds}, {"aborted", res.aborted},
                  {"final_loss", res.loss_history.empty() ? 0.0 : res.loss_history.back()}});
      if (res.aborted) return 3;
    } else if (*prior) {
      const fs::path bdir = find_benchmark_dir(pr_data);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      std::vector<Field> lfs;
      for (const auto& sd : list_samples(bdir, "train")) lfs.push_back(field_read(sd / "lf.fgrd"));
      RngStream rng(cfg.seed, 4);
      const auto res = train_edm_prior(lfs, cfg, rng);
      save_edm_prior(res.prior, pr_out);
      print_json({{"iterations", res.loss_log.size()}, {"sigma_data", res.prior.sigma_data},
                  {"final_loss", res.loss_log.empty() ? 0.0 : res.loss_log.back()}});
    } else if (*guid) {
      const fs::path bdir = sample_benchmark_dir(bg_sample);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      const SampleInputs s = prepare_inputs(cfg, bg_sample, g.noise_alpha, load_manifest(bdir).data_std);
      const EdmPrior pr = load_edm_prior(bg_prior);
      const auto op = make_residual_operator(cfg, s.coef ? &*s.coef : nullptr);
      RngStream rng = RngStream(cfg.seed, 5).fork(s.id);
      const auto t0 = std::chrono::steady_clock::now();
      const Field x = guidance_sample(pr, s.obs, op.get(), cfg.baselines.guidance, rng);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      field_write(x, bg_out);
      print_json({{"seconds", secs}, {"observation_misfit", observation_misfit(x, s.obs)}});
    } else if (*plot) {
      PlotOptions opt;
      opt.frame = pl_frame;
      opt.symmetric = pl_sym;
      opt.scale = pl_scale;
      std::vector<Field> fs_;
      for (const auto& p : pl_fields) fs_.push_back(field_read(p));
      if (fs_.size() == 1) {
        plot_field(fs_[0], opt, pl_out);
      } else {
        plot_side_by_side(fs_, opt, pl_out);
      }
    } else if (*cres) {
      const Benchmark b = parse_benchmark(cr_bench);
      const ExperimentConfig cfg = resolve_config(g, std::nullopt, b);
      const Field x = field_read(cr_field);
      std::optional<Field> coef;
      if (!cr_coef.empty()) coef = field_read(cr_coef);
      const auto op = make_residual_operator(cfg, coef ? &*coef : nullptr);
      if (x.dims() != op->dims()) throw ConfigError("field dims " + dims_string(x.dims()) + " do not match config " + dims_string(op->dims()));
      const ResidualField r = op->evaluate(x);
      print_json({{"residual_rms", residual_norm(r)}, {"max_abs", r.max_abs()}, {"valid_nodes", r.valid_count()}});
    } else if (*cfl) {
      const fs::path bdir = sample_benchmark_dir(cf_sample);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      const SampleInputs s = load_sample_inputs(cf_sample);
      const auto op = make_residual_operator(cfg, s.coef ? &*s.coef : nullptr);
      const auto est = estimate_residual_floor(s.obs, *op, s.lf, cf_iters, cf_step);
      print_json({{"floor", est.value}, {"iterations", est.iterations}, {"converged", est.converged},
                  {"start", est.history.empty() ? 0.0 : est.history.front()}});
    } else if (*cgc) {
      const auto rep = gradcheck_burgers_toy(g.seed.value_or(0), gc_probes);
      json probes = json::array();
      for (const auto& p : rep.probes)
        probes.push_back({{"index", p.index}, {"analytic", p.analytic}, {"numeric", p.numeric}, {"rel_error", p.rel_error}});
      print_json({{"max_rel_error", rep.max_rel_error}, {"pass", rep.max_rel_error < 1e-4}, {"probes", probes}});
      if (rep.max_rel_error >= 1e-4) return 3;
    } else if (*bench) {
      const fs::path bdir = find_benchmark_dir(bn_data);
      const ExperimentConfig cfg = resolve_config(g, bdir, std::nullopt);
      const Checkpoint ck = load_checkpoint(bn_ckpt);
      json rows = json::array();
      for (const auto& sd : list_samples(bdir, "test")) {
        const SampleInputs s = load_sample_inputs(sd);
        const double t = bench_walltime(
            [&] {
              RngStream rng = RngStream(cfg.seed, 2).fork(s.id);
              (void)infer(s.lf, s.obs, ck.params, cfg.trainer, rng);
            },
            bn_reps);
        rows.push_back({{"sample_id", s.id}, {"median_seconds", t}});
      }
      print_json({{"repetitions", bn_reps}, {"samples", rows}});
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
