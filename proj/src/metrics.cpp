#include "picsb/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "picsb/dataset.hpp"
#include "picsb/errors.hpp"
#include "picsb/observation.hpp"
#include "picsb/residual.hpp"

namespace picsb {

double rel_error(const Field& pred, const Field& ref) {
  if (!pred.same_shape(ref)) {
    throw ConfigError("rel_error: dims " + dims_string(pred.dims()) + " vs " + dims_string(ref.dims()));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = pred[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw ConfigError("rel_error: reference has zero norm");
  return 100.0 * std::sqrt(num) / std::sqrt(den);
}

std::string metrics_csv_line(const MetricsRow& r) {
  auto num = [](double v) {
    char b[32];
    const auto res = std::to_chars(b, b + sizeof b, v);
    return std::string(b, res.ptr);
  };
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.6f", r.wall_seconds);
  return r.sample_id + "," + num(r.rel_error_percent) + "," + num(r.residual_rms) + "," + num(r.observation_misfit) +
         "," + wall + "," + r.regime + "," + num(r.noise_alpha);
}

void write_run_info(const RunInfo& info, const std::filesystem::path& pred_dir) {
  nlohmann::json j{{"noise_alpha", info.noise_alpha}, {"seconds", info.seconds}};
  write_text_atomic(pred_dir / "run.json", j.dump(2) + "\n");
}

RunInfo read_run_info(const std::filesystem::path& pred_dir) {
  RunInfo info;
  const auto p = pred_dir / "run.json";
  if (!std::filesystem::exists(p)) return info;
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const auto j = nlohmann::json::parse(ss.str());
    info.noise_alpha = j.value("noise_alpha", 0.0);
    if (j.contains("seconds")) info.seconds = j["seconds"].get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
  return info;
}

EvalSummary eval_run(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir, Benchmark benchmark,
                     const std::filesystem::path& out_csv) {
  const auto bdir = resolve_benchmark_dir(ref_dir, benchmark);
  const ExperimentConfig cfg = load_config(bdir / "config.json");
  if (cfg.benchmark != benchmark) throw ConfigError("eval: dataset is " + to_string(cfg.benchmark));
  const auto samples = list_samples(bdir, "test");
  if (samples.empty()) throw IoError("eval: no test samples under " + bdir.string());

  std::vector<std::string> missing;
  for (const auto& s : samples) {
    const auto p = pred_dir / (s.filename().string() + ".fgrd");
    if (!std::filesystem::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "eval: missing predictions:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }

  const RunInfo info = read_run_info(pred_dir);
  EvalSummary sum;
  for (const auto& s : samples) {
    const SampleInputs in = load_sample_inputs(s);
    const Field ref = load_sample_hf(s);
    const Field pred = field_read(pred_dir / (in.id + ".fgrd"));
    const auto op = make_residual_operator(cfg, in.coef ? &*in.coef : nullptr);
    MetricsRow r;
    r.sample_id = in.id;
    r.rel_error_percent = rel_error(pred, ref);
    r.residual_rms = residual_norm(op->evaluate(pred));
    r.observation_misfit = observation_misfit(pred, in.obs);
    auto it = info.seconds.find(in.id);
    r.wall_seconds = it == info.seconds.end() ? 0.0 : it->second;
    r.regime = to_string(cfg.regime);
    r.noise_alpha = info.noise_alpha;
    sum.rows.push_back(r);
  }
  const double n = static_cast<double>(sum.rows.size());
  sum.mean.sample_id = "mean";
  sum.mean.regime = to_string(cfg.regime);
  sum.mean.noise_alpha = info.noise_alpha;
  for (const auto& r : sum.rows) {
    sum.mean.rel_error_percent += r.rel_error_percent / n;
    sum.mean.residual_rms += r.residual_rms / n;
    sum.mean.observation_misfit += r.observation_misfit / n;
    sum.mean.wall_seconds += r.wall_seconds / n;
  }

  if (!out_csv.empty()) {
    std::string text = std::string(kMetricsHeader) + "\n";
    for (const auto& r : sum.rows) text += metrics_csv_line(r) + "\n";
    text += metrics_csv_line(sum.mean) + "\n";
    write_text_atomic(out_csv, text);
  }
  return sum;
}

double bench_walltime(const std::function<void()>& fn, std::size_t repetitions) {
  if (repetitions == 0) throw ConfigError("bench: repetitions must be >= 1");
  std::vector<double> t;
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto a = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t m = t.size() / 2;
  return t.size() % 2 ? t[m] : 0.5 * (t[m - 1] + t[m]);
}

}  // namespace picsb
