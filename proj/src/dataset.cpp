#include "picsb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "picsb/errors.hpp"
#include "picsb/pde.hpp"

namespace picsb {

using nlohmann::json;

namespace {

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04zu", i);
  return buf;
}

const char* lf_method(Benchmark b) {
  switch (b) {
    case Benchmark::burgers:
      return "burgers_nu_lf";
    case Benchmark::darcy:
      return "nearest";
    case Benchmark::kolmogorov:
      return "bicubic";
  }
  return "?";
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Field rebuild_lf(const ExperimentConfig& cfg, const Field& lf, const ObservationSet& obs) {
  switch (cfg.benchmark) {
    case Benchmark::burgers:
      return lf;
    case Benchmark::darcy:
      return make_lf_interp(obs, InterpMethod::nearest, false);
    case Benchmark::kolmogorov:
      return make_lf_interp(obs, InterpMethod::bicubic, true);
  }
  return lf;
}

GeneratedSample generate_sample(const ExperimentConfig& cfg, const std::string& split, std::size_t index) {
  const RngStream root(cfg.seed, 0);
  const RngStream rng = root.fork(split).fork("sample", index);
  RngStream ic_rng = rng.fork("ic");
  RngStream mask_rng = rng.fork("mask");
  GeneratedSample s;
  switch (cfg.benchmark) {
    case Benchmark::burgers: {
      const auto& b = cfg.solver.burgers;
      const Field u0 = sample_burgers_ic(ic_rng, b.nx * b.fine_factor);
      s.hf = simulate_burgers(u0, b);
      s.lf = make_lf_burgers(u0, b);
      break;
    }
    case Benchmark::darcy: {
      s.coef = sample_darcy_permeability(ic_rng, cfg.solver.darcy);
      s.hf = solve_darcy(*s.coef, cfg.solver.darcy);
      break;
    }
    case Benchmark::kolmogorov: {
      const Field w0 = sample_kolmogorov_ic(ic_rng, cfg.solver.kolmogorov);
      s.hf = simulate_kolmogorov(w0, cfg.solver.kolmogorov);
      break;
    }
  }
  s.mask = sample_mask(cfg.regime, cfg.ratio, cfg.geometry(), mask_rng);
  ObservationSet obs = observe(s.hf, s.mask);
  s.obsvals = obs.values;
  if (cfg.benchmark != Benchmark::burgers) s.lf = rebuild_lf(cfg, s.lf, obs);
  return s;
}

DatasetManifest gen_dataset(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const std::string bname = to_string(cfg.benchmark);
  const fs::path bdir = out_dir / "data" / bname;
  std::error_code ec;
  fs::create_directories(bdir, ec);
  if (ec) throw IoError("cannot create " + bdir.string() + ": " + ec.message());

  DatasetManifest m;
  m.root = bdir;
  m.benchmark = cfg.benchmark;
  m.seed = cfg.seed;
  double sum = 0.0, sumsq = 0.0;
  std::size_t count = 0;

  for (const std::string split : {"train", "test"}) {
    const std::size_t n = split == "train" ? cfg.n_train : cfg.n_test;
    for (std::size_t i = 0; i < n; ++i) {
      GeneratedSample s = generate_sample(cfg, split, i);
      const std::string id = sample_name(i);
      const fs::path dir = bdir / split / id;
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
      ManifestEntry e{split, id, split + "/" + id, {}};
      auto put = [&](const std::string& name, const Field& f) {
        field_write(f, dir / name);
        e.checksums[name] = checksum_hex(field_encode(f));
      };
      put("lf.fgrd", s.lf);
      put("hf.fgrd", s.hf);
      put("mask.fgrd", s.mask);
      put("obsvals.fgrd", s.obsvals);
      if (s.coef) put("coef.fgrd", *s.coef);

      json meta;
      meta["benchmark"] = bname;
      meta["split"] = split;
      meta["index"] = i;
      meta["seed"] = cfg.seed;
      meta["regime"] = to_string(cfg.regime);
      meta["ratio"] = cfg.ratio;
      meta["lf_method"] = lf_method(cfg.benchmark);
      meta["dims"] = cfg.dims;
      meta["solver"] = json::parse(config_to_json(cfg))["solver"][bname];
      const std::string meta_text = meta.dump(2) + "\n";
      write_text_atomic(dir / "meta.json", meta_text);
      e.checksums["meta.json"] = checksum_hex(std::span(reinterpret_cast<const unsigned char*>(meta_text.data()), meta_text.size()));
      m.samples.push_back(std::move(e));

      if (split == "train") {
        for (double v : s.hf.values()) {
          sum += v;
          sumsq += v * v;
        }
        count += s.hf.size();
      }
    }
  }
  if (count > 0) {
    const double mean = sum / static_cast<double>(count);
    m.data_std = std::sqrt(std::max(0.0, sumsq / static_cast<double>(count) - mean * mean));
  }

  json man;
  man["benchmark"] = bname;
  man["seed"] = cfg.seed;
  man["data_std"] = m.data_std;
  man["samples"] = json::array();
  for (const auto& e : m.samples) {
    man["samples"].push_back({{"split", e.split}, {"id", e.id}, {"path", e.path}, {"checksums", e.checksums}});
  }
  save_config(cfg, bdir / "config.json");
  write_text_atomic(bdir / "manifest.json", man.dump(2) + "\n");
  return m;
}

SampleInputs load_sample_inputs(const fs::path& sample_dir) {
  if (!fs::is_directory(sample_dir)) throw IoError("sample directory not found: " + sample_dir.string());
  SampleInputs s;
  s.id = sample_dir.filename().string();
  s.dir = sample_dir;
  s.lf = field_read(sample_dir / "lf.fgrd");
  s.obs.mask = field_read(sample_dir / "mask.fgrd");
  s.obs.values = field_read(sample_dir / "obsvals.fgrd");
  if (!s.lf.same_shape(s.obs.mask) || !s.obs.mask.same_shape(s.obs.values)) {
    throw IoError(sample_dir.string() + ": lf/mask/obsvals dims differ");
  }
  if (fs::exists(sample_dir / "coef.fgrd")) s.coef = field_read(sample_dir / "coef.fgrd");
  return s;
}

Field load_sample_hf(const fs::path& sample_dir) { return field_read(sample_dir / "hf.fgrd"); }

fs::path resolve_benchmark_dir(const fs::path& dir, Benchmark b) {
  const std::string name = to_string(b);
  for (const fs::path& cand : {dir, dir / name, dir / "data" / name}) {
    if (fs::exists(cand / "manifest.json") && cand.filename() == name) return cand;
  }
  if (fs::exists(dir / "manifest.json")) return dir;
  throw IoError("no " + name + " dataset (manifest.json) under " + dir.string());
}

DatasetManifest load_manifest(const fs::path& benchmark_dir) {
  json j;
  try {
    j = json::parse(read_text(benchmark_dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError(benchmark_dir.string() + "/manifest.json: " + e.what());
  }
  DatasetManifest m;
  m.root = benchmark_dir;
  m.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
  m.seed = j.value("seed", std::uint64_t{0});
  m.data_std = j.value("data_std", 0.0);
  for (const auto& e : j.at("samples")) {
    m.samples.push_back(ManifestEntry{e.at("split"), e.at("id"), e.at("path"),
                                      e.at("checksums").get<std::map<std::string, std::string>>()});
  }
  return m;
}

std::vector<fs::path> list_samples(const fs::path& benchmark_dir, const std::string& split) {
  std::vector<fs::path> out;
  const fs::path d = benchmark_dir / split;
  if (!fs::is_directory(d)) return out;
  for (const auto& e : fs::directory_iterator(d))
    if (e.is_directory() && e.path().filename().string().starts_with("sample_")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace picsb
