#include "doctest.h"
#include "helpers.hpp"
#include "picsb/errors.hpp"
#include "picsb/residual.hpp"
#include "picsb/spectral.hpp"

using namespace picsb;
using test::kPi;

TEST_CASE("burgers residual: constant state and hand stencil value") {
  const Field c = Field::filled({8, 5}, 3.0);
  CHECK(residual_burgers(c, 0.01, 0.125, 0.1).max_abs() == 0.0);
  const double nu = 0.37;
  const Field x({3, 2}, std::vector<double>{0, 0, 0, 1, 0, 0});
  const ResidualField r = residual_burgers(x, nu, 1.0, 1.0);
  CHECK(r.values.at(1, 1) == doctest::Approx(1 + 2 * nu).epsilon(1e-14));
  CHECK(r.valid.at(1, 0) == 0.0);
  CHECK(r.valid_count() == 3);
}

TEST_CASE("residual norm: RMS over valid nodes") {
  ResidualField r{Field::filled({2, 2}, 2.0), Field::filled({2, 2}, 1.0)};
  CHECK(residual_norm(r) == doctest::Approx(2.0));
  r.values = Field::filled({2, 2}, 0.0);
  CHECK(residual_norm(r) == 0.0);
  ResidualField h{Field({3}, std::vector<double>{3, 4, 100}), Field({3}, std::vector<double>{1, 1, 0})};
  CHECK(residual_norm(h) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-14));
}

TEST_CASE("burgers residual: non-advective part is linear") {
  // The odd part in eps removes the quadratic advection term exactly.
  const Field e = test::random_field({8, 6}, 2);
  auto odd = [&](double eps) {
    Field y({8, 6}), ym({8, 6});
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = eps * e[k], ym[k] = -eps * e[k];
    const auto r = residual_burgers(y, 0.2, 0.1, 0.05), rm = residual_burgers(ym, 0.2, 0.1, 0.05);
    std::vector<double> out(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) out[k] = 0.5 * (r.values[k] - rm.values[k]);
    return out;
  };
  const auto a = odd(1e-3), b = odd(2e-3);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(2 * a[k]).epsilon(1e-9));
}

TEST_CASE("darcy residual: solver output, zero state, manufactured solution") {
  DarcySpec s;
  s.n = 33;
  RngStream r(3, 0);
  const Field a = sample_darcy_permeability(r, s);
  const Field u = solve_darcy(a, s);
  CHECK(residual_norm(residual_darcy(u, a, s.forcing, s.h())) <= 1e-8 * s.forcing);
  const auto z = residual_darcy(Field({s.n, s.n}), a, 1.0, s.h());
  for (std::size_t i = 1; i + 1 < s.n; ++i) CHECK(z.values.at(i, 5) == doctest::Approx(-1.0));

  auto manufactured_err = [](std::size_t n) {
    const double h = 1.0 / static_cast<double>(n - 1);
    Field uu({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double x = j * h, y = i * h;
        uu[i * n + j] = x * (1 - x) * y * (1 - y);
      }
    const auto rr = residual_darcy(uu, Field::filled({n, n}, 1.0), 1.0, h);
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double x = j * h, y = i * h;
        const double exact = 2 * y * (1 - y) + 2 * x * (1 - x) - 1.0;
        m = std::max(m, std::abs(rr.values.at(i, j) - exact));
      }
    return m;
  };
  // The 5-point Laplacian is exact on this biquadratic, so the error is roundoff.
  CHECK(manufactured_err(17) < 1e-10);
  CHECK(manufactured_err(33) < 1e-10);
}

TEST_CASE("stream function and velocity of a single mode") {
  const std::size_t n = 32;
  const double h = 2 * kPi / n;
  Field w({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w[i * n + j] = std::sin(j * h);
  const Field psi = stream_function(w);
  const auto [v1, v2] = velocity_from_vorticity(w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(psi.at(i, j) == doctest::Approx(-std::sin(j * h)).epsilon(1e-12).scale(1.0));
      CHECK(std::abs(v1.at(i, j)) < 1e-12);
      CHECK(v2.at(i, j) == doctest::Approx(std::cos(j * h)).scale(1.0).epsilon(1e-12));
    }
  CHECK(field_max_abs(stream_function(Field({n, n}))) == 0.0);
  CHECK_THROWS_WITH(stream_function(Field::filled({n, n}, 1.0)), doctest::Contains("non-zero-mean"));
}

TEST_CASE("stream function inverts the laplacian for band-limited fields") {
  const std::size_t n = 32;
  const double h = 2 * kPi / n;
  RngStream r(8, 0);
  Field w({n, n});
  for (int m = 0; m < 6; ++m) {
    const int k1 = 1 + r.uniform_index(5), k2 = r.uniform_index(5);
    const double a = r.normal(), ph = r.uniform(0, 2 * kPi);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i * n + j] += a * std::sin(k1 * j * h + k2 * i * h + ph);
  }
  const Field psi = stream_function(w);
  const Spectral2D sp(n);
  const auto lap = sp.laplacian(psi.values());
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(std::abs(lap[k] - w[k]) < 1e-10);
}

TEST_CASE("kolmogorov residual: zero vorticity leaves the forcing") {
  KolmogorovSpec s;
  s.n = 16;
  s.frames = 2;
  const auto r = residual_kolmogorov(Field({2, 16, 16}), s);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) CHECK(r.values.at(1, i, j) == doctest::Approx(4 * std::cos(4 * i * s.h())).scale(1.0));
  CHECK(r.valid_count() == 256);
  CHECK_THROWS_AS(residual_kolmogorov(Field({1, 16, 16}), s), ConfigError);
}

TEST_CASE("residual operators: vjp matches finite differences") {
  auto check_op = [](const ResidualOperator& op, const Field& x0, std::uint64_t seed) {
    const Field g = test::random_field(op.dims(), seed + 1);
    auto dot = [&](const Field& x) {
      const auto r = op.evaluate(x);
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) s += r.valid[k] * r.values[k] * g[k];
      return s;
    };
    const auto v = op.vjp(x0, g.values());
    RngStream r(seed, 1);
    for (int p = 0; p < 8; ++p) {
      const std::size_t k = r.uniform_index(x0.size());
      Field xp = x0, xm = x0;
      const double hh = 1e-6;
      xp[k] += hh, xm[k] -= hh;
      const double fd = (dot(xp) - dot(xm)) / (2 * hh);
      CHECK(std::abs(fd - v[k]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  };
  check_op(BurgersResidual({8, 6}, 0.05, 0.125, 0.2), test::random_field({8, 6}, 1), 1);
  DarcySpec ds;
  ds.n = 12;
  RngStream r(2, 0);
  check_op(DarcyResidual(sample_darcy_permeability(r, ds), 1.0, ds.h()), test::random_field({12, 12}, 2), 2);
  KolmogorovSpec ks;
  ks.n = 16;
  ks.frames = 3;
  Field w = test::random_field({3, 16, 16}, 3);
  check_op(KolmogorovResidual(ks), w, 3);
}

TEST_CASE("residual floor: full mask, nested masks, darcy unconstrained") {
  auto cfg = test::burgers_toy(16, 8);
  const auto op = make_residual_operator(cfg);
  RngStream r(1, 0);
  const Field u0 = sample_burgers_ic(r, 16 * cfg.solver.burgers.fine_factor);
  const Field y = simulate_burgers(u0, cfg.solver.burgers);
  const auto full = estimate_residual_floor(observe(y, Field::filled(y.dims(), 1.0)), *op, y, 50, 1e-3);
  CHECK(full.iterations == 0);
  CHECK(full.value == residual_norm(op->evaluate(y)));

  RngStream mr(2, 0);
  const Field mb = sample_mask(Regime::R1, 0.5, cfg.geometry(), mr);
  Field ma = mb;
  for (std::size_t k = 0; k < ma.size(); k += 2) ma[k] = 0.0;
  const Field init = make_lf_burgers(u0, cfg.solver.burgers);
  const auto fa = estimate_residual_floor(observe(y, ma), *op, init, 300, 2e-4);
  const auto fb = estimate_residual_floor(observe(y, mb), *op, init, 300, 2e-4);
  CHECK(fa.value <= fb.value + 1e-6);
  for (std::size_t k = 1; k < fb.history.size(); ++k) CHECK(fb.history[k] <= fb.history[k - 1]);
  for (std::size_t k = 0; k < y.size(); ++k)
    if (mb[k] != 0.0) CHECK(fb.best[k] == y[k]);

  DarcySpec ds;
  ds.n = 17;
  RngStream dr(3, 0);
  const Field a = sample_darcy_permeability(dr, ds);
  const Field u = solve_darcy(a, ds);
  DarcyResidual dop(a, ds.forcing, ds.h());
  const auto fd = estimate_residual_floor(observe(u, Field({17, 17})), dop, u, 5, 1e-6);
  CHECK(fd.value <= 1e-8 * ds.forcing);
}

TEST_CASE("burgers error bound: hand value, zero numerator, monotonicity") {
  const Field c = Field::filled({8, 4}, 1.0);
  CHECK(burgers_error_bound(c, 1.0, 0.01, 0.125, 0.1, 1.0) == doctest::Approx(1.0 / (10 + 0.01 * kPi * kPi)).epsilon(1e-12));
  CHECK(burgers_error_bound(c, 1.0, 0.01, 0.125, 0.1, 1.0) == doctest::Approx(0.09902).epsilon(1e-4));
  CHECK(burgers_error_bound(c, 0.0, 0.01, 0.125, 0.1, 1.0) == 0.0);
  double prev = -1;
  for (double d : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    const double b = burgers_error_bound(c, d, 0.01, 0.125, 0.1, 1.0);
    CHECK(b > prev);
    prev = b;
  }
  prev = 1e9;
  for (double nu : {0.01, 0.1, 1.0, 10.0}) {
    const double b = burgers_error_bound(c, 1.0, nu, 0.125, 0.1, 1.0);
    CHECK(b < prev);
    prev = b;
  }
  Field steep({8, 4});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j) steep[i * 4 + j] = i < 4 ? 100.0 * i : 0.0;
  CHECK_THROWS_WITH_AS(burgers_error_bound(steep, 1.0, 0.01, 0.125, 0.1, 1.0), doctest::Contains("inapplicable"),
                       NumericalError);
}
