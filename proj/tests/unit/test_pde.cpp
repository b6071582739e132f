#include "doctest.h"
#include "helpers.hpp"
#include "picsb/dataset.hpp"
#include "picsb/errors.hpp"
#include "picsb/pde.hpp"
#include "picsb/residual.hpp"
#include "picsb/spectral.hpp"

using namespace picsb;
using test::kPi;

TEST_CASE("burgers ic: zero mean, deterministic, unit std") {
  RngStream r(0, 0);
  double pooled = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < 1000; ++k) {
    RngStream a = r.fork("ic", k), b = r.fork("ic", k);
    const Field u = sample_burgers_ic(a, 64);
    if (k < 5) {
      CHECK(std::abs(field_mean(u)) < 1e-10);
      CHECK(u.bit_equal(sample_burgers_ic(b, 64)));
    }
    for (double v : u.values()) pooled += v * v;
    n += u.size();
  }
  CHECK(std::sqrt(pooled / static_cast<double>(n)) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("burgers: zero and constant states are fixed points") {
  BurgersSpec s;
  s.nx = 16, s.nt = 8;
  const Field z = simulate_burgers(Field({s.nx * s.fine_factor}), s);
  CHECK(field_max_abs(z) == 0.0);
  const Field c = simulate_burgers(Field::filled({s.nx * s.fine_factor}, 0.7), s);
  for (double v : c.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(field_max_abs(make_lf_burgers(Field({s.nx * s.fine_factor}), s)) == 0.0);
}

TEST_CASE("burgers: lf equals hf at equal viscosity and is smoother otherwise") {
  BurgersSpec s;
  s.nx = 32, s.nt = 16;
  RngStream r(2, 0);
  const Field u0 = sample_burgers_ic(r, s.nx * s.fine_factor);
  BurgersSpec eq = s;
  eq.nu_lf = eq.nu_hf;
  CHECK(make_lf_burgers(u0, eq).bit_equal(simulate_burgers(u0, eq)));
  auto max_grad = [&](const Field& u) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.nx; ++i)
      for (std::size_t j = 0; j < s.nt; ++j) m = std::max(m, std::abs(u.at((i + 1) % s.nx, j) - u.at(i, j)));
    return m;
  };
  CHECK(max_grad(make_lf_burgers(u0, s)) < max_grad(simulate_burgers(u0, s)));
}

TEST_CASE("darcy permeability: binary and balanced") {
  DarcySpec s;
  double frac = 0.0;
  for (int k = 0; k < 20; ++k) {
    RngStream r(k, 0);
    const Field a = sample_darcy_permeability(r, s);
    std::size_t hi = 0;
    for (double v : a.values()) {
      CHECK((v == s.a_low || v == s.a_high));
      hi += v == s.a_high;
    }
    frac += static_cast<double>(hi) / static_cast<double>(a.size()) / 20.0;
  }
  CHECK(frac == doctest::Approx(0.5).epsilon(0.1));
  RngStream a(1, 0), b(1, 0);
  CHECK(sample_darcy_permeability(a, s).bit_equal(sample_darcy_permeability(b, s)));
}

TEST_CASE("darcy solve: homogeneity, scaling, maximum principle, center value") {
  DarcySpec s;
  s.n = 33;
  RngStream r(4, 0);
  const Field a = sample_darcy_permeability(r, s);
  DarcySpec zero = s;
  zero.forcing = 0.0;
  CHECK(field_max_abs(solve_darcy(a, zero)) == 0.0);
  const Field u = solve_darcy(a, s);
  Field a2 = a;
  for (auto& v : a2.values()) v *= 2.0;
  const Field u2 = solve_darcy(a2, s);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(u2[i] == doctest::Approx(0.5 * u[i]).epsilon(1e-8));
  for (double v : u.values()) CHECK(v >= 0.0);

  DarcySpec c;
  c.n = 65;
  const Field one = Field::filled({c.n, c.n}, 1.0);
  CHECK(solve_darcy(one, c).at(32, 32) == doctest::Approx(0.0737).epsilon(0.001 / 0.0737));
}

TEST_CASE("kolmogorov: single mode decays at the viscous rate") {
  KolmogorovSpec s;
  s.n = 32;
  s.frames = 8;
  s.forcing_enabled = false;
  Field w0({s.n, s.n});
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.n; ++j) w0[i * s.n + j] = std::sin(static_cast<double>(j) * s.h());
  const Field w = simulate_kolmogorov(w0, s);
  REQUIRE(w.dims() == Dims{8, 32, 32});
  double amp = 0.0;
  for (std::size_t j = 0; j < s.n; ++j) amp = std::max(amp, std::abs(w.at(7, 0, j)));
  CHECK(amp == doctest::Approx(std::exp(-1.25 / s.re)).epsilon(1e-3));
}

TEST_CASE("kolmogorov: frames are zero mean and divergence free") {
  KolmogorovSpec s;
  s.n = 32;
  s.frames = 4;
  RngStream r(5, 0);
  const Field w = simulate_kolmogorov(sample_kolmogorov_ic(r, s), s);
  CHECK(s.frame_spacing() == doctest::Approx(1.25 / 4));
  const auto [v1, v2] = velocity_from_vorticity(w);
  const std::size_t n = s.n;
  for (std::size_t f = 0; f < s.frames; ++f) {
    double m = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) m += w[f * n * n + k];
    CHECK(std::abs(m / static_cast<double>(n * n)) < 1e-10);
  }
  const Spectral2D sp(n);
  double maxdiv = 0.0;
  for (std::size_t f = 0; f < s.frames; ++f) {
    const auto a = v1.values().subspan(f * n * n, n * n), b = v2.values().subspan(f * n * n, n * n);
    const auto da = sp.d_dxi1(a), db = sp.d_dxi2(b);
    for (std::size_t k = 0; k < n * n; ++k) maxdiv = std::max(maxdiv, std::abs(da[k] + db[k]));
  }
  CHECK(maxdiv < 1e-8);
  KolmogorovSpec p = default_config(Benchmark::kolmogorov, "paper").solver.kolmogorov;
  CHECK(p.frames == 40);
  CHECK(p.frame_spacing() == doctest::Approx(1.25 / 40));
}

TEST_CASE("kolmogorov: non-zero-mean initial vorticity is rejected") {
  KolmogorovSpec s;
  s.n = 16;
  CHECK_THROWS_AS(simulate_kolmogorov(Field::filled({16, 16}, 1.0), s), ConfigError);
}

TEST_CASE("lf interpolation: coverage, single point, bicubic beats nearest") {
  const std::size_t n = 32;
  Field x({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      x[i * n + j] = std::sin(2 * kPi * j / n) * std::cos(2 * kPi * i / n);
  const ObservationSet full = observe(x, Field::filled({n, n}, 1.0));
  CHECK(make_lf_interp(full, InterpMethod::nearest, true).bit_equal(x));
  CHECK(make_lf_interp(full, InterpMethod::bicubic, true).bit_equal(x));

  Field m1({n, n});
  m1[5 * n + 9] = 1.0;
  Field seven = Field::filled({n, n}, 7.0);
  const Field one = make_lf_interp(observe(seven, m1), InterpMethod::nearest, false);
  for (double v : one.values()) CHECK(v == 7.0);

  MaskGeometry g{{n, n}, std::nullopt};
  double win = 0;
  for (int s = 0; s < 5; ++s) {
    RngStream r(s, 0);
    const ObservationSet obs = observe(x, sample_mask(Regime::R1, 0.1, g, r));
    const Field a = make_lf_interp(obs, InterpMethod::nearest, true);
    const Field b = make_lf_interp(obs, InterpMethod::bicubic, true);
    double ea = 0, eb = 0;
    for (std::size_t k = 0; k < x.size(); ++k) ea += std::pow(a[k] - x[k], 2), eb += std::pow(b[k] - x[k], 2);
    win += eb < ea;
  }
  CHECK(win == 5);
}

TEST_CASE("dataset: layout, determinism and darcy lf construction") {
  const auto dir = test::temp_dir("dataset");
  CHECK(default_config(Benchmark::burgers).n_train == 32);
  CHECK(default_config(Benchmark::burgers).n_test == 4);
  auto cfg = default_config(Benchmark::darcy);
  cfg.solver.darcy.n = 16;
  cfg.dims = {16, 16};
  cfg.n_train = 2;
  cfg.n_test = 1;
  const auto m1 = gen_dataset(cfg, dir / "a");
  const auto m2 = gen_dataset(cfg, dir / "b");
  REQUIRE(m1.samples.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m1.samples[i].checksums == m2.samples[i].checksums);
  const auto bdir = resolve_benchmark_dir(dir / "a", Benchmark::darcy);
  CHECK(list_samples(bdir, "train").size() == 2);
  CHECK(list_samples(bdir, "test").size() == 1);
  const auto sd = list_samples(bdir, "test")[0];
  const SampleInputs s = load_sample_inputs(sd);
  const Field hf = load_sample_hf(sd);
  CHECK(s.coef.has_value());
  CHECK(s.lf.bit_equal(make_lf_interp(observe(hf, s.obs.mask), InterpMethod::nearest, false)));
  CHECK(std::filesystem::exists(sd / "meta.json"));
  CHECK(load_manifest(bdir).data_std > 0.0);
}
