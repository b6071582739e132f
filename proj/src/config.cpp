#include "picsb/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "picsb/errors.hpp"

namespace picsb {

using nlohmann::json;

NLOHMANN_JSON_SERIALIZE_ENUM(Benchmark, {{Benchmark::burgers, "burgers"},
                                         {Benchmark::darcy, "darcy"},
                                         {Benchmark::kolmogorov, "kolmogorov"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Regime, {{Regime::R1, "R1"}, {Regime::R2, "R2"}, {Regime::R3, "R3"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BurgersSpec, nx, nt, nu_hf, nu_lf, t_end, fine_factor, cfl, substeps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DarcySpec, n, forcing, a_low, a_high, length_scale, tol, max_iter)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(KolmogorovSpec, n, frames, re, t_end, forcing_amplitude,
                                                forcing_wavenumber, drag, forcing_enabled, cfl, max_dt, fixed_dt,
                                                ic_std)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SolverConfig, burgers, darcy, kolmogorov)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetConfig, in_channels, enc, dec, kernel, d_cond, time_hidden,
                                                norm_eps, padding)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, steps, epsilon, refresh_period, iterations, lr,
                                                clip_norm, batch_size)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PinnsConfig, width, depth, colloc, lambda_obs, lambda_phys,
                                                lambda_bc, n_bc, lr, epochs, grad_clip)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GuidanceConfig, steps, sigma_min, sigma_max, rho, lambda_obs,
                                                lambda_phys, lambda_bc, switch_fraction, max_step_ratio,
                                                prior_iterations, prior_lr, prior_batch, sigma_data, p_mean, p_std)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineConfig, pinns, guidance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, benchmark, dims, frames, regime, ratio, solver,
                                                trainer, net, baselines, seed, n_train, n_test)

Benchmark parse_benchmark(const std::string& s) {
  if (s == "burgers") return Benchmark::burgers;
  if (s == "darcy") return Benchmark::darcy;
  if (s == "kolmogorov") return Benchmark::kolmogorov;
  throw ConfigError("unknown benchmark '" + s + "' (expected burgers, darcy or kolmogorov)");
}

std::string to_string(Benchmark b) {
  switch (b) {
    case Benchmark::burgers:
      return "burgers";
    case Benchmark::darcy:
      return "darcy";
    case Benchmark::kolmogorov:
      return "kolmogorov";
  }
  return "?";
}

void NetConfig::validate() const {
  if (in_channels == 0) throw ConfigError("net: in_channels must be positive");
  if (enc.empty() || enc.size() != dec.size()) throw ConfigError("net: encoder/decoder lists must have equal length");
  for (auto c : enc)
    if (c == 0) throw ConfigError("net: channels must be positive");
  for (auto c : dec)
    if (c == 0) throw ConfigError("net: channels must be positive");
  if (kernel % 2 == 0) throw ConfigError("net: kernel must be odd");
  if (d_cond == 0 || time_hidden == 0) throw ConfigError("net: d_cond and time_hidden must be positive");
  if (!(norm_eps > 0.0)) throw ConfigError("net: norm_eps must be > 0");
  if (padding != "circular" && padding != "reflect" && padding != "zero") {
    throw ConfigError("net: padding must be circular, reflect or zero");
  }
}

void TrainConfig::validate() const {
  if (steps < 2) throw ConfigError("trainer: steps must be >= 2");
  if (!(epsilon > 0.0)) throw ConfigError("trainer: epsilon must be > 0");
  if (refresh_period < 1) throw ConfigError("trainer: refresh_period must be >= 1");
  if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
  if (!(lr > 0.0) || !(clip_norm > 0.0)) throw ConfigError("trainer: lr and clip_norm must be > 0");
}

void PinnsConfig::validate() const {
  if (width == 0 || depth < 2 || colloc == 0 || epochs == 0) {
    throw ConfigError("pinns: width, colloc and epochs must be positive and depth >= 2");
  }
  if (lambda_obs < 0.0 || lambda_phys < 0.0 || lambda_bc < 0.0) throw ConfigError("pinns: weights must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("pinns: lr must be > 0");
}

void GuidanceConfig::validate() const {
  if (steps < 2) throw ConfigError("guidance: steps must be >= 2");
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max)) throw ConfigError("guidance: need 0 < sigma_min < sigma_max");
  if (!(rho > 0.0)) throw ConfigError("guidance: rho must be > 0");
  if (lambda_obs < 0.0 || lambda_phys < 0.0 || lambda_bc < 0.0) throw ConfigError("guidance: weights must be >= 0");
  if (switch_fraction < 0.0 || switch_fraction > 1.0) throw ConfigError("guidance: switch_fraction must be in [0, 1]");
}

MaskGeometry ExperimentConfig::geometry() const {
  switch (benchmark) {
    case Benchmark::burgers:
      return MaskGeometry{dims, 1};
    case Benchmark::darcy:
      return MaskGeometry{dims, std::nullopt};
    case Benchmark::kolmogorov:
      return MaskGeometry{dims, 0};
  }
  return MaskGeometry{dims, std::nullopt};
}

void ExperimentConfig::validate() const {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("ratio must lie in (0, 1]");
  for (auto d : dims)
    if (d == 0) throw ConfigError("dims must be positive");
  switch (benchmark) {
    case Benchmark::burgers:
      solver.burgers.validate();
      if (dims != Dims{solver.burgers.nx, solver.burgers.nt}) throw ConfigError("dims must equal [nx, nt] for burgers");
      if (frames != solver.burgers.nt) throw ConfigError("frames must equal nt for burgers");
      break;
    case Benchmark::darcy:
      solver.darcy.validate();
      if (dims != Dims{solver.darcy.n, solver.darcy.n}) throw ConfigError("dims must equal [n, n] for darcy");
      if (frames != 1) throw ConfigError("frames must be 1 for darcy");
      break;
    case Benchmark::kolmogorov: {
      const auto& k = solver.kolmogorov;
      k.validate();
      if (dims != Dims{k.frames, k.n, k.n}) throw ConfigError("dims must equal [frames, n, n] for kolmogorov");
      if (frames != k.frames) throw ConfigError("frames must equal solver frames for kolmogorov");
      break;
    }
  }
  const std::size_t channels = benchmark == Benchmark::kolmogorov ? frames : 1;
  if (net.in_channels != channels) {
    throw ConfigError("net.in_channels must be " + std::to_string(channels) + " for " + to_string(benchmark));
  }
  net.validate();
  trainer.validate();
  baselines.pinns.validate();
  baselines.guidance.validate();
}

ExperimentConfig default_config(Benchmark b, const std::string& profile) {
  if (profile != "desk" && profile != "paper") throw ConfigError("unknown profile '" + profile + "'");
  const bool paper = profile == "paper";
  ExperimentConfig c;
  c.benchmark = b;
  if (paper) {
    c.net.enc = {128, 256};
    c.net.dec = {256, 128};
    c.trainer.iterations = 100000;
    c.baselines.pinns.width = 512;
    c.baselines.pinns.depth = 6;
    c.baselines.pinns.colloc = 8192;
    c.baselines.pinns.epochs = 100000;
    c.baselines.pinns.n_bc = 2048;
    c.baselines.guidance.steps = 2000;
  }
  switch (b) {
    case Benchmark::burgers: {
      auto& s = c.solver.burgers;
      if (paper) s.nx = s.nt = 128;
      c.dims = {s.nx, s.nt};
      c.frames = s.nt;
      c.net.padding = "circular";
      break;
    }
    case Benchmark::darcy: {
      auto& s = c.solver.darcy;
      if (paper) s.n = 128;
      c.dims = {s.n, s.n};
      c.frames = 1;
      c.net.padding = "reflect";
      c.trainer.lr = 1e-6;
      c.trainer.clip_norm = 1e-5;
      c.baselines.pinns.grad_clip = 1e-5;
      c.baselines.guidance.lambda_obs = 1e-3;
      c.baselines.guidance.lambda_phys = 1e-1;
      c.baselines.guidance.lambda_bc = 1e-1;
      break;
    }
    case Benchmark::kolmogorov: {
      auto& s = c.solver.kolmogorov;
      if (paper) {
        s.n = 256;
        s.frames = 40;
        c.baselines.pinns.width = 256;
        c.baselines.pinns.depth = 4;
      }
      c.dims = {s.frames, s.n, s.n};
      c.frames = s.frames;
      c.net.in_channels = s.frames;
      c.net.padding = "circular";
      c.baselines.guidance.lambda_obs = 3.2e6;
      c.baselines.guidance.lambda_phys = 1000.0;
      break;
    }
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j = cfg;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig base;
  if (j.contains("benchmark")) {
    if (!j["benchmark"].is_string()) throw ConfigError("config key 'benchmark' must be a string");
    base = default_config(parse_benchmark(j["benchmark"].get<std::string>()));
  }
  json merged = base;
  merged.merge_patch(j);
  ExperimentConfig cfg;
  try {
    cfg = merged.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has an invalid field: ") + e.what());
  }
  if (merged.contains("regime") && merged["regime"].is_string()) parse_regime(merged["regime"].get<std::string>());
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  write_text_atomic(path, config_to_json(cfg) + "\n");
}

std::string net_config_to_json(const NetConfig& cfg) { return json(cfg).dump(); }

NetConfig net_config_from_json(const std::string& text) {
  try {
    NetConfig cfg = json::parse(text).get<NetConfig>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid net config: ") + e.what());
  }
}

}  // namespace picsb
