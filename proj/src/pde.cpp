#include "picsb/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "picsb/errors.hpp"
#include "picsb/spectral.hpp"

namespace picsb {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

// Solves the periodic system (1 + 2r) x_i - r x_{i-1} - r x_{i+1} = rhs_i
// (cyclic Thomas via Sherman-Morrison).
std::vector<double> solve_cyclic(double r, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  const double a = -r, b = 1.0 + 2.0 * r, c = -r;
  if (r == 0.0) return rhs;
  if (n < 3) throw ConfigError("cyclic solve needs n >= 3");
  const double gamma = -b;
  std::vector<double> diag(n, b);
  diag[0] = b - gamma;
  diag[n - 1] = b - a * c / gamma;

  auto tridiag = [&](std::vector<double> d) {
    std::vector<double> cp(n), dp(n);
    cp[0] = c / diag[0];
    dp[0] = d[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double m = diag[i] - a * cp[i - 1];
      cp[i] = c / m;
      dp[i] = (d[i] - a * dp[i - 1]) / m;
    }
    std::vector<double> x(n);
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
  };

  std::vector<double> x = tridiag(std::move(rhs));
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = c;
  std::vector<double> z = tridiag(std::move(u));
  const double fact = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
  return x;
}

// Conservative central flux difference of u^2 / 2.
std::vector<double> burgers_advection(const std::vector<double>& u, double h) {
  const std::size_t n = u.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double up = u[(i + 1) % n], um = u[(i + n - 1) % n];
    out[i] = (up * up - um * um) / (4.0 * h);
  }
  return out;
}

std::vector<double> periodic_laplacian(const std::vector<double>& u, double h) {
  const std::size_t n = u.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (u[(i + 1) % n] - 2.0 * u[i] + u[(i + n - 1) % n]) / (h * h);
  return out;
}

}  // namespace

void BurgersSpec::validate() const {
  if (nx < 3 || nt < 3) throw ConfigError("burgers: nx and nt must be >= 3");
  if (!(nu_hf > 0.0) || !(nu_lf > 0.0)) throw ConfigError("burgers: viscosity must be > 0");
  if (fine_factor < 1) throw ConfigError("burgers: fine_factor must be >= 1");
  if (!(t_end > 0.0) || !(cfl > 0.0)) throw ConfigError("burgers: t_end and cfl must be > 0");
}

void DarcySpec::validate() const {
  if (n < 5) throw ConfigError("darcy: n must be >= 5");
  if (!(a_low > 0.0) || !(a_high > 0.0)) throw ConfigError("darcy: permeability values must be > 0");
}

double KolmogorovSpec::h() const { return 2.0 * kPi / static_cast<double>(n); }

void KolmogorovSpec::validate() const {
  if (!is_power_of_two(n) || n < 4) throw ConfigError("kolmogorov: n must be a power of two >= 4");
  if (frames < 2) throw ConfigError("kolmogorov: frames must be >= 2");
  if (!(re > 0.0)) throw ConfigError("kolmogorov: Re must be > 0");
}

// ---- Burgers ------------------------------------------------------------

Field sample_burgers_ic(RngStream& rng, std::size_t nx) {
  if (nx < 3) throw ConfigError("burgers ic: nx must be >= 3");
  const std::size_t kmax = (nx - 1) / 2;
  std::vector<double> a(kmax + 1), b(kmax + 1);
  for (std::size_t k = 1; k <= kmax; ++k) {
    a[k] = rng.normal();
    b[k] = rng.normal();
  }
  Field u({nx}, Tags{"space"});
  for (std::size_t i = 0; i < nx; ++i) {
    const double xi = static_cast<double>(i) / static_cast<double>(nx);
    double s = 0.0;
    for (std::size_t k = 1; k <= kmax; ++k) {
      const double amp = 1.0 / static_cast<double>(k * k);
      const double arg = 2.0 * kPi * static_cast<double>(k) * xi;
      s += amp * (a[k] * std::cos(arg) + b[k] * std::sin(arg));
    }
    u[i] = s;
  }
  const double m = field_mean(u);
  for (auto& v : u.values()) v -= m;
  const double sd = field_std(u);
  if (sd > 0.0)
    for (auto& v : u.values()) v /= sd;
  return u;
}

Field simulate_burgers_with_viscosity(const Field& u0, const BurgersSpec& spec, double nu) {
  spec.validate();
  if (!(nu > 0.0)) throw ConfigError("burgers: viscosity must be > 0");
  if (u0.rank() != 1) throw ConfigError("burgers: u0 must be one-dimensional");
  const std::size_t nf = u0.size();
  if (nf < spec.nx || nf % spec.nx != 0) {
    throw ConfigError("burgers: u0 length " + std::to_string(nf) + " is not a multiple of nx " +
                      std::to_string(spec.nx));
  }
  const std::size_t stride = nf / spec.nx;
  const double h = 1.0 / static_cast<double>(nf);
  const double interval = spec.dt();

  std::vector<double> u(u0.values().begin(), u0.values().end());
  const double umax = std::max(1e-12, field_max_abs(u0));
  std::size_t sub = spec.substeps;
  if (sub == 0) sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(interval * umax / (spec.cfl * h))));
  const double dt = interval / static_cast<double>(sub);
  const double r = 0.5 * dt * nu / (h * h);

  Field out({spec.nx, spec.nt}, Tags{"space", "time"});
  auto store = [&](std::size_t j) {
    for (std::size_t i = 0; i < spec.nx; ++i) out.at(i, j) = u[i * stride];
  };
  store(0);

  std::size_t step = 0;
  std::vector<double> rhs(nf);
  for (std::size_t j = 1; j < spec.nt; ++j) {
    for (std::size_t s = 0; s < sub; ++s, ++step) {
      // Heun predictor/corrector for advection, Crank-Nicolson for diffusion.
      const auto lap = periodic_laplacian(u, h);
      const auto n0 = burgers_advection(u, h);
      for (std::size_t i = 0; i < nf; ++i) rhs[i] = u[i] + 0.5 * dt * nu * lap[i] - dt * n0[i];
      const auto ustar = solve_cyclic(r, rhs);
      const auto n1 = burgers_advection(ustar, h);
      for (std::size_t i = 0; i < nf; ++i) rhs[i] = u[i] + 0.5 * dt * nu * lap[i] - 0.5 * dt * (n0[i] + n1[i]);
      u = solve_cyclic(r, rhs);
      for (double v : u) {
        if (!std::isfinite(v)) throw NumericalError("burgers: non-finite state at step " + std::to_string(step));
      }
    }
    store(j);
  }
  return out;
}

Field simulate_burgers(const Field& u0, const BurgersSpec& spec) {
  return simulate_burgers_with_viscosity(u0, spec, spec.nu_hf);
}

Field make_lf_burgers(const Field& u0, const BurgersSpec& spec) {
  return simulate_burgers_with_viscosity(u0, spec, spec.nu_lf);
}

// ---- Darcy --------------------------------------------------------------

Field sample_darcy_permeability(RngStream& rng, const DarcySpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  std::vector<double> noise = rng.normals(n * n);
  Spectral2D sp(n, 1.0);
  auto s = sp.forward(noise);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double k1 = sp.wavenumber(j), k2 = sp.wavenumber(i);
      s[i * n + j] *= std::exp(-0.5 * (k1 * k1 + k2 * k2) * spec.length_scale * spec.length_scale);
    }
  const auto g = sp.inverse(s);
  auto sorted = g;
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  const double median = sorted[mid];
  Field a({n, n}, Tags{"row", "col"});
  for (std::size_t i = 0; i < g.size(); ++i) a[i] = g[i] >= median ? spec.a_high : spec.a_low;
  return a;
}

namespace {

double harmonic(double x, double y) { return 2.0 * x * y / (x + y); }

}  // namespace

std::vector<double> darcy_apply(std::span<const double> u, const Field& a, double h) {
  const std::size_t n = a.dims()[0];
  std::vector<double> out(n * n, 0.0);
  const double inv_h2 = 1.0 / (h * h);
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const std::size_t p = i * n + j;
      const double ae = harmonic(a[p], a[p + 1]);
      const double aw = harmonic(a[p], a[p - 1]);
      const double an = harmonic(a[p], a[p + n]);
      const double as = harmonic(a[p], a[p - n]);
      out[p] = inv_h2 * ((ae + aw + an + as) * u[p] - ae * u[p + 1] - aw * u[p - 1] - an * u[p + n] - as * u[p - n]);
    }
  return out;
}

std::vector<double> darcy_apply_adjoint(std::span<const double> g, const Field& a, double h) {
  const std::size_t n = a.dims()[0];
  std::vector<double> out(n * n, 0.0);
  const double inv_h2 = 1.0 / (h * h);
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const std::size_t p = i * n + j;
      const double ae = harmonic(a[p], a[p + 1]);
      const double aw = harmonic(a[p], a[p - 1]);
      const double an = harmonic(a[p], a[p + n]);
      const double as = harmonic(a[p], a[p - n]);
      const double gp = g[p] * inv_h2;
      out[p] += (ae + aw + an + as) * gp;
      out[p + 1] -= ae * gp;
      out[p - 1] -= aw * gp;
      out[p + n] -= an * gp;
      out[p - n] -= as * gp;
    }
  return out;
}

Field solve_darcy(const Field& a, const DarcySpec& spec) {
  spec.validate();
  if (a.rank() != 2 || a.dims()[0] != spec.n || a.dims()[1] != spec.n) {
    throw ConfigError("darcy: permeability must be " + std::to_string(spec.n) + "x" + std::to_string(spec.n));
  }
  for (double v : a.values())
    if (!(v > 0.0)) throw ConfigError("darcy: permeability must be strictly positive");

  const std::size_t n = spec.n;
  const double h = spec.h();
  auto interior = [n](std::size_t p) {
    const std::size_t i = p / n, j = p % n;
    return i > 0 && j > 0 && i + 1 < n && j + 1 < n;
  };
  // Conjugate gradients on the interior unknowns (boundary held at zero).
  std::vector<double> u(n * n, 0.0), r(n * n, 0.0), p(n * n, 0.0);
  for (std::size_t k = 0; k < n * n; ++k)
    if (interior(k)) r[k] = spec.forcing;
  double rr = 0.0;
  for (double v : r) rr += v * v;
  const double b_norm = std::sqrt(rr);
  if (b_norm == 0.0) return Field({n, n}, Tags{"row", "col"});
  p = r;
  std::size_t it = 0;
  for (; it < spec.max_iter && std::sqrt(rr) > spec.tol * b_norm; ++it) {
    const auto ap = darcy_apply(p, a, h);
    double pap = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) pap += p[k] * ap[k];
    const double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) {
      u[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
      rr_new += r[k] * r[k];
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t k = 0; k < n * n; ++k) p[k] = r[k] + beta * p[k];
  }
  if (std::sqrt(rr) > spec.tol * b_norm) {
    throw NumericalError("darcy: conjugate gradients did not converge in " + std::to_string(it) + " iterations");
  }
  return Field({n, n}, std::move(u), Tags{"row", "col"});
}

// ---- Kolmogorov ---------------------------------------------------------

std::vector<double> kolmogorov_static_forcing(const KolmogorovSpec& spec) {
  const std::size_t n = spec.n;
  std::vector<double> f(n * n, 0.0);
  if (!spec.forcing_enabled) return f;
  const double h = spec.h();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi2 = h * static_cast<double>(i);
    const double v = -spec.forcing_amplitude * std::cos(spec.forcing_wavenumber * xi2);
    for (std::size_t j = 0; j < n; ++j) f[i * n + j] = v;
  }
  return f;
}

Field sample_kolmogorov_ic(RngStream& rng, const KolmogorovSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  Spectral2D sp(n);
  auto s = sp.forward(rng.normals(n * n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double k1 = sp.wavenumber(j), k2 = sp.wavenumber(i);
      const double k2sum = k1 * k1 + k2 * k2;
      // Energy concentrated at low wavenumbers; zero mean.
      s[i * n + j] *= k2sum == 0.0 ? 0.0 : std::pow(k2sum + 9.0, -1.25);
      if (!sp.keep_dealiased(i, j)) s[i * n + j] = 0.0;
    }
  auto w = sp.inverse(s);
  Field out({n, n}, std::move(w), Tags{"row", "col"});
  const double sd = field_std(out);
  const double m = field_mean(out);
  for (auto& v : out.values()) v = (v - m) * (sd > 0.0 ? spec.ic_std / sd : 0.0);
  return out;
}

namespace {

struct KolmogorovRhs {
  const Spectral2D& sp;
  const KolmogorovSpec& spec;
  std::vector<Spectral2D::Complex> forcing_hat;

  // Explicit part N(w) = -(v . grad w) - drag * w + f, dealiased, plus max|v|.
  std::vector<Spectral2D::Complex> operator()(const std::vector<Spectral2D::Complex>& w_hat, double* vmax) const {
    using C = Spectral2D::Complex;
    const std::size_t n = sp.n();
    std::vector<C> v1(n * n), v2(n * n), w1(n * n), w2(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t p = i * n + j;
        const double k1 = sp.wavenumber_odd(j), k2 = sp.wavenumber_odd(i);
        const double l1 = sp.wavenumber(j), l2 = sp.wavenumber(i);
        const double k2sum = l1 * l1 + l2 * l2;
        const C psi = k2sum == 0.0 ? C(0.0, 0.0) : -w_hat[p] / k2sum;
        v1[p] = C(0.0, k2) * psi;
        v2[p] = -C(0.0, k1) * psi;
        w1[p] = C(0.0, k1) * w_hat[p];
        w2[p] = C(0.0, k2) * w_hat[p];
      }
    const auto pv1 = sp.inverse(v1), pv2 = sp.inverse(v2), pw1 = sp.inverse(w1), pw2 = sp.inverse(w2);
    std::vector<double> adv(n * n);
    double m = 0.0;
    for (std::size_t p = 0; p < n * n; ++p) {
      adv[p] = pv1[p] * pw1[p] + pv2[p] * pw2[p];
      m = std::max(m, std::hypot(pv1[p], pv2[p]));
    }
    if (vmax) *vmax = m;
    auto out = sp.forward(adv);
    const double drag = spec.forcing_enabled ? spec.drag : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t p = i * n + j;
        out[p] = sp.keep_dealiased(i, j) ? -out[p] : C(0.0, 0.0);
        out[p] += forcing_hat[p] - drag * w_hat[p];
      }
    out[0] = 0.0;
    return out;
  }
};

}  // namespace

Field simulate_kolmogorov(const Field& omega0, const KolmogorovSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  if (omega0.size() != n * n) throw ConfigError("kolmogorov: omega0 must be " + std::to_string(n) + "x" + std::to_string(n));
  if (std::abs(field_mean(omega0)) > 1e-8) throw ConfigError("kolmogorov: omega0 must be zero-mean");

  using C = Spectral2D::Complex;
  Spectral2D sp(n);
  const double nu = 1.0 / spec.re;
  const double h = spec.h();
  KolmogorovRhs rhs{sp, spec, sp.forward(kolmogorov_static_forcing(spec))};
  auto w = sp.forward(omega0.values());
  w[0] = 0.0;

  std::vector<double> k2(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double l1 = sp.wavenumber(j), l2 = sp.wavenumber(i);
      k2[i * n + j] = l1 * l1 + l2 * l2;
    }

  Field out({spec.frames, n, n}, Tags{"frame", "row", "col"});
  double t = 0.0;
  std::size_t step = 0;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const double target = spec.frame_spacing() * static_cast<double>(f + 1);
    while (target - t > 1e-12) {
      double vmax = 0.0;
      const auto n0 = rhs(w, &vmax);
      double dt;
      if (spec.fixed_dt > 0.0) {
        dt = std::min(spec.fixed_dt, target - t);
        if (vmax * spec.fixed_dt / h > 1.0) {
          const double suggested = spec.cfl * h / vmax;
          throw NumericalError("kolmogorov: CFL violated at step " + std::to_string(step) + " (dt " +
                               std::to_string(spec.fixed_dt) + ", max|v| " + std::to_string(vmax) +
                               "); suggested dt <= " + std::to_string(suggested));
        }
      } else {
        dt = std::min({spec.max_dt, target - t, vmax > 0.0 ? spec.cfl * h / vmax : target - t});
      }
      // IMEX Heun: Crank-Nicolson viscosity, explicit advection/forcing.
      std::vector<C> ws(n * n), wn(n * n);
      for (std::size_t p = 0; p < n * n; ++p) {
        const double lhs = 1.0 + 0.5 * dt * nu * k2[p];
        const double rhs_lin = 1.0 - 0.5 * dt * nu * k2[p];
        ws[p] = (rhs_lin * w[p] + dt * n0[p]) / lhs;
      }
      const auto n1 = rhs(ws, nullptr);
      for (std::size_t p = 0; p < n * n; ++p) {
        const double lhs = 1.0 + 0.5 * dt * nu * k2[p];
        const double rhs_lin = 1.0 - 0.5 * dt * nu * k2[p];
        wn[p] = (rhs_lin * w[p] + 0.5 * dt * (n0[p] + n1[p])) / lhs;
        if (!std::isfinite(wn[p].real()) || !std::isfinite(wn[p].imag())) {
          throw NumericalError("kolmogorov: non-finite state at step " + std::to_string(step));
        }
      }
      wn[0] = 0.0;
      w = std::move(wn);
      t += dt;
      ++step;
    }
    const auto phys = sp.inverse(w);
    std::copy(phys.begin(), phys.end(), out.values().begin() + static_cast<std::ptrdiff_t>(f * n * n));
  }
  return out;
}

}  // namespace picsb
