#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "picsb/config.hpp"
#include "picsb/field.hpp"

namespace picsb {

/// 100 ||pred - ref||_2 / ||ref||_2 over all entries.
double rel_error(const Field& pred, const Field& ref);

struct MetricsRow {
  std::string sample_id;
  double rel_error_percent = 0.0;
  double residual_rms = 0.0;
  double observation_misfit = 0.0;
  double wall_seconds = 0.0;
  std::string regime;
  double noise_alpha = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "sample_id,rel_error_percent,residual_rms,observation_misfit,wall_seconds,regime,noise_alpha";

std::string metrics_csv_line(const MetricsRow& r);

/// Per-sample timing and noise level written by `infer` next to predictions.
struct RunInfo {
  double noise_alpha = 0.0;
  std::map<std::string, double> seconds;
};
void write_run_info(const RunInfo& info, const std::filesystem::path& pred_dir);
RunInfo read_run_info(const std::filesystem::path& pred_dir);

struct EvalSummary {
  std::vector<MetricsRow> rows;
  MetricsRow mean;
};

/// Scores <pred_dir>/<sample_id>.fgrd against every test sample of the
/// dataset at `ref_dir`. Writes per-sample rows plus a trailing mean row.
EvalSummary eval_run(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir, Benchmark benchmark,
                     const std::filesystem::path& out_csv);

/// Median wall-clock seconds of `fn` over `repetitions` calls.
double bench_walltime(const std::function<void()>& fn, std::size_t repetitions);

}  // namespace picsb
