#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "picsb/config.hpp"
#include "picsb/field.hpp"
#include "picsb/observation.hpp"

namespace picsb {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string split;
  std::string id;
  /// Relative to the benchmark directory.
  std::string path;
  std::map<std::string, std::string> checksums;
};

struct DatasetManifest {
  fs::path root;  // data/<benchmark>
  Benchmark benchmark = Benchmark::burgers;
  std::uint64_t seed = 0;
  /// Std of the clean HF training split (noise protocol reference).
  double data_std = 0.0;
  std::vector<ManifestEntry> samples;
};

/// Writes data/<benchmark>/{train,test}/sample_NNNN/ under `out_dir` plus
/// data/<benchmark>/manifest.json and config.json. Returns the manifest.
DatasetManifest gen_dataset(const ExperimentConfig& cfg, const fs::path& out_dir);

/// Generates one sample in memory: lf, hf, mask, obsvals and (Darcy) coef.
struct GeneratedSample {
  Field lf, hf, mask, obsvals;
  std::optional<Field> coef;
};
GeneratedSample generate_sample(const ExperimentConfig& cfg, const std::string& split, std::size_t index);

/// Model inputs of one sample; never touches hf.fgrd.
struct SampleInputs {
  std::string id;
  fs::path dir;
  Field lf;
  ObservationSet obs;
  std::optional<Field> coef;
};
SampleInputs load_sample_inputs(const fs::path& sample_dir);
Field load_sample_hf(const fs::path& sample_dir);

/// Resolves the benchmark directory: accepts data/<benchmark>, data/, or
/// the gen-data output directory.
fs::path resolve_benchmark_dir(const fs::path& dir, Benchmark b);
DatasetManifest load_manifest(const fs::path& benchmark_dir);
/// Sorted sample directories of a split.
std::vector<fs::path> list_samples(const fs::path& benchmark_dir, const std::string& split);

/// Rebuilds the LF input from (possibly noisy) observations for the
/// interpolation-based benchmarks; Burgers keeps its LF trajectory.
Field rebuild_lf(const ExperimentConfig& cfg, const Field& lf, const ObservationSet& obs);

}  // namespace picsb
