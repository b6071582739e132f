#include <fstream>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "picsb/bridge.hpp"
#include "picsb/dataset.hpp"
#include "picsb/errors.hpp"
#include "picsb/metrics.hpp"
#include "picsb/plot.hpp"

using namespace picsb;

TEST_CASE("rel_error: hand cases and zero reference") {
  const Field x = test::random_field({7, 3}, 1);
  CHECK(rel_error(x, x) == 0.0);
  CHECK(rel_error(Field::zeros_like(x), x) == doctest::Approx(100.0).epsilon(1e-14));
  Field y = x;
  for (auto& v : y.values()) v *= 1.1;
  CHECK(std::abs(rel_error(y, x) - 10.0) < 1e-10);
  CHECK_THROWS_AS(rel_error(x, Field::zeros_like(x)), ConfigError);
  CHECK_THROWS_AS(rel_error(x, Field({3, 7})), ConfigError);
}

TEST_CASE("eval_run: perfect, projected and lf predictions") {
  const auto dir = test::temp_dir("eval");
  auto cfg = test::burgers_toy();
  cfg.n_train = 1;
  cfg.n_test = 2;
  gen_dataset(cfg, dir);
  const auto bdir = resolve_benchmark_dir(dir, Benchmark::burgers);
  const auto perfect = dir / "perfect", lf = dir / "lf";
  std::filesystem::create_directories(perfect);
  std::filesystem::create_directories(lf);
  std::vector<double> expect;
  for (const auto& sd : list_samples(bdir, "test")) {
    const auto id = sd.filename().string();
    const Field hf = load_sample_hf(sd);
    const SampleInputs in = load_sample_inputs(sd);
    field_write(hf, perfect / (id + ".fgrd"));
    field_write(in.lf, lf / (id + ".fgrd"));
    long double num = 0, den = 0;
    for (std::size_t k = 0; k < hf.size(); ++k) {
      num += (long double)(in.lf[k] - hf[k]) * (in.lf[k] - hf[k]);
      den += (long double)hf[k] * hf[k];
    }
    expect.push_back(static_cast<double>(100.0L * std::sqrt(num / den)));
  }
  const auto a = eval_run(perfect, dir, Benchmark::burgers, dir / "a.csv");
  CHECK(a.mean.rel_error_percent == 0.0);
  for (const auto& r : a.rows) CHECK(r.observation_misfit == 0.0);
  const auto b = eval_run(lf, dir, Benchmark::burgers, {});
  REQUIRE(b.rows.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) CHECK(b.rows[k].rel_error_percent == doctest::Approx(expect[k]).epsilon(1e-12));
  std::ifstream in(dir / "a.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == kMetricsHeader);
  std::filesystem::remove(lf / "sample_0001.fgrd");
  CHECK_THROWS_WITH_AS(eval_run(lf, dir, Benchmark::burgers, {}), doctest::Contains("sample_0001"), IoError);
}

TEST_CASE("bench_walltime: sleep calibration") {
  const double t = bench_walltime([] { std::this_thread::sleep_for(std::chrono::milliseconds(100)); }, 3);
  CHECK(t == doctest::Approx(0.1).epsilon(0.2));
}

TEST_CASE("plot: pixel dims, constant field, frame selection") {
  const auto dir = test::temp_dir("plot");
  PlotOptions o;
  o.scale = 3;
  plot_field(test::random_field({8, 12}, 1), o, dir / "a.png");
  const Image a = read_png(dir / "a.png");
  CHECK(a.width == 36);
  CHECK(a.height == 24);
  plot_field(Field::filled({5, 5}, 2.0), o, dir / "c.png");
  const Image c = read_png(dir / "c.png");
  for (std::size_t k = 0; k < c.rgb.size(); ++k) CHECK(c.rgb[k] == c.rgb[k % 3]);
  const Field w = test::random_field({40, 8, 8}, 2);
  o.frame = 38;
  o.symmetric = true;
  plot_field(w, o, dir / "k.png");
  CHECK(plot_slice(w, 38).at(3, 4) == w.at(38, 3, 4));
  o.frame = 40;
  CHECK_THROWS_AS(plot_field(w, o, dir / "bad.png"), ConfigError);
  o.frame.reset();
  plot_side_by_side({w, w, w, w}, o, dir / "s.png");
  CHECK(read_png(dir / "s.png").width == 4 * 24 + 3 * 3);
}
