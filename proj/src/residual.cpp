#include "picsb/residual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "picsb/errors.hpp"
#include "picsb/spectral.hpp"

namespace picsb {

namespace {

constexpr double kPi = std::numbers::pi;

void require_torus_frames(const Field& omega, const char* who) {
  const auto& d = omega.dims();
  const bool ok = (d.size() == 2 && d[0] == d[1]) || (d.size() == 3 && d[1] == d[2]);
  if (!ok) throw ConfigError(std::string(who) + ": expected [n, n] or [frames, n, n], got " + dims_string(d));
}

std::size_t frame_count(const Field& omega) { return omega.rank() == 3 ? omega.dims()[0] : 1; }
std::size_t side(const Field& omega) { return omega.dims().back(); }

void require_zero_mean(const Field& omega, const char* who) {
  const std::size_t n = side(omega), np = n * n;
  for (std::size_t f = 0; f < frame_count(omega); ++f) {
    double m = 0.0;
    for (std::size_t k = 0; k < np; ++k) m += omega[f * np + k];
    m /= static_cast<double>(np);
    if (std::abs(m) > 1e-8) throw ConfigError(std::string(who) + ": non-zero-mean vorticity in frame " + std::to_string(f));
  }
}

std::span<const double> frame_of(const Field& x, std::size_t f, std::size_t np) {
  return x.values().subspan(f * np, np);
}

// Pieces of the vorticity advection evaluated per frame.
struct FrameTerms {
  std::vector<double> v1, v2, w1, w2, lap;
};

FrameTerms frame_terms(const Spectral2D& sp, std::span<const double> w) {
  FrameTerms t;
  const auto psi = sp.inverse_laplacian(w);
  t.v1 = sp.d_dxi2(psi);
  t.v2 = sp.d_dxi1(psi);
  for (auto& v : t.v2) v = -v;
  t.w1 = sp.d_dxi1(w);
  t.w2 = sp.d_dxi2(w);
  t.lap = sp.laplacian(w);
  return t;
}

}  // namespace

std::size_t ResidualField::valid_count() const {
  std::size_t c = 0;
  for (double v : valid.values()) c += v != 0.0 ? 1 : 0;
  return c;
}

double ResidualField::max_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid[i] != 0.0) m = std::max(m, std::abs(values[i]));
  return m;
}

double residual_norm(const ResidualField& r) {
  const std::size_t c = r.valid_count();
  if (c == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < r.values.size(); ++i)
    if (r.valid[i] != 0.0) s += r.values[i] * r.values[i];
  return std::sqrt(s / static_cast<double>(c));
}

// ---- Burgers ----------------------------------------------------------------

BurgersResidual::BurgersResidual(Dims dims, double nu, double h, double dt)
    : dims_(std::move(dims)), nu_(nu), h_(h), dt_(dt) {
  if (dims_.size() != 2 || dims_[0] < 3 || dims_[1] < 2) {
    throw ConfigError("burgers residual: grid must be [nx >= 3, nt >= 2], got " + dims_string(dims_));
  }
  if (!(h_ > 0.0) || !(dt_ > 0.0)) throw ConfigError("burgers residual: h and dt must be > 0");
}

ResidualField BurgersResidual::evaluate(const Field& x) const {
  if (x.dims() != dims_) throw ConfigError("burgers residual: dims " + dims_string(x.dims()) + " vs " + dims_string(dims_));
  const std::size_t nx = dims_[0], nt = dims_[1];
  ResidualField r{Field(dims_, Tags{"space", "time"}), Field(dims_, Tags{"space", "time"})};
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t ip = (i + 1) % nx, im = (i + nx - 1) % nx;
    for (std::size_t j = 1; j < nt; ++j) {
      const double u = x.at(i, j);
      r.values.at(i, j) = (u - x.at(i, j - 1)) / dt_ + u * (x.at(ip, j) - x.at(im, j)) / (2.0 * h_) -
                          nu_ * (x.at(ip, j) - 2.0 * u + x.at(im, j)) / (h_ * h_);
      r.valid.at(i, j) = 1.0;
    }
  }
  return r;
}

std::vector<double> BurgersResidual::vjp(const Field& x, std::span<const double> g) const {
  const std::size_t nx = dims_[0], nt = dims_[1];
  std::vector<double> out(x.size(), 0.0);
  auto idx = [nt](std::size_t i, std::size_t j) { return i * nt + j; };
  const double d2 = nu_ / (h_ * h_);
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t ip = (i + 1) % nx, im = (i + nx - 1) % nx;
    for (std::size_t j = 1; j < nt; ++j) {
      const double gi = g[idx(i, j)];
      if (gi == 0.0) continue;
      const double u = x.at(i, j);
      out[idx(i, j)] += gi * (1.0 / dt_ + (x.at(ip, j) - x.at(im, j)) / (2.0 * h_) + 2.0 * d2);
      out[idx(i, j - 1)] -= gi / dt_;
      out[idx(ip, j)] += gi * (u / (2.0 * h_) - d2);
      out[idx(im, j)] += gi * (-u / (2.0 * h_) - d2);
    }
  }
  return out;
}

ResidualField residual_burgers(const Field& x, double nu, double h, double dt) {
  if (x.rank() != 2) throw ConfigError("burgers residual: expected a [space, time] field");
  return BurgersResidual(x.dims(), nu, h, dt).evaluate(x);
}

// ---- Darcy ------------------------------------------------------------------

DarcyResidual::DarcyResidual(Field a, double f, double h) : a_(std::move(a)), f_(f), h_(h) {
  if (a_.rank() != 2 || a_.dims()[0] != a_.dims()[1] || a_.dims()[0] < 3) {
    throw ConfigError("darcy residual: permeability must be square, got " + dims_string(a_.dims()));
  }
  for (double v : a_.values())
    if (!(v > 0.0)) throw ConfigError("darcy residual: permeability must be strictly positive");
}

ResidualField DarcyResidual::evaluate(const Field& x) const {
  if (!x.same_shape(a_)) throw ConfigError("darcy residual: dims " + dims_string(x.dims()) + " vs " + dims_string(a_.dims()));
  const std::size_t n = a_.dims()[0];
  const auto au = darcy_apply(x.values(), a_, h_);
  ResidualField r{Field(a_.dims(), Tags{"row", "col"}), Field(a_.dims(), Tags{"row", "col"})};
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      r.values.at(i, j) = au[i * n + j] - f_;
      r.valid.at(i, j) = 1.0;
    }
  return r;
}

std::vector<double> DarcyResidual::vjp(const Field& /*x*/, std::span<const double> g) const {
  return darcy_apply_adjoint(g, a_, h_);
}

ResidualField residual_darcy(const Field& u, const Field& a, double f, double h) {
  if (!u.same_shape(a)) throw ConfigError("darcy residual: u and a dims differ");
  return DarcyResidual(a, f, h).evaluate(u);
}

// ---- Kolmogorov ---------------------------------------------------------------

Field stream_function(const Field& omega) {
  require_torus_frames(omega, "stream_function");
  require_zero_mean(omega, "stream_function");
  const std::size_t n = side(omega), np = n * n;
  Spectral2D sp(n);
  Field psi(omega.dims(), omega.axis_tags());
  for (std::size_t f = 0; f < frame_count(omega); ++f) {
    const auto p = sp.inverse_laplacian(frame_of(omega, f, np));
    std::copy(p.begin(), p.end(), psi.values().begin() + static_cast<std::ptrdiff_t>(f * np));
  }
  return psi;
}

std::pair<Field, Field> velocity_from_vorticity(const Field& omega) {
  const Field psi = stream_function(omega);
  const std::size_t n = side(omega), np = n * n;
  Spectral2D sp(n);
  Field v1(omega.dims(), omega.axis_tags()), v2(omega.dims(), omega.axis_tags());
  for (std::size_t f = 0; f < frame_count(omega); ++f) {
    const auto a = sp.d_dxi2(frame_of(psi, f, np));
    const auto b = sp.d_dxi1(frame_of(psi, f, np));
    for (std::size_t k = 0; k < np; ++k) {
      v1[f * np + k] = a[k];
      v2[f * np + k] = -b[k];
    }
  }
  return {std::move(v1), std::move(v2)};
}

KolmogorovResidual::KolmogorovResidual(const KolmogorovSpec& spec)
    : spec_(spec), dims_{spec.frames, spec.n, spec.n} {
  spec_.validate();
}

ResidualField KolmogorovResidual::evaluate(const Field& x) const {
  if (x.dims() != dims_) throw ConfigError("kolmogorov residual: dims " + dims_string(x.dims()) + " vs " + dims_string(dims_));
  const std::size_t n = spec_.n, np = n * n;
  Spectral2D sp(n);
  const double nu = 1.0 / spec_.re;
  const double dg = spec_.frame_spacing();
  const double drag = spec_.forcing_enabled ? spec_.drag : 0.0;
  const auto forcing = kolmogorov_static_forcing(spec_);
  ResidualField r{Field(dims_, Tags{"frame", "row", "col"}), Field(dims_, Tags{"frame", "row", "col"})};
  for (std::size_t f = 1; f < spec_.frames; ++f) {
    const auto w = frame_of(x, f, np);
    const auto prev = frame_of(x, f - 1, np);
    const FrameTerms t = frame_terms(sp, w);
    for (std::size_t k = 0; k < np; ++k) {
      r.values[f * np + k] = (w[k] - prev[k]) / dg + t.v1[k] * t.w1[k] + t.v2[k] * t.w2[k] - nu * t.lap[k] -
                             forcing[k] + drag * w[k];
      r.valid[f * np + k] = 1.0;
    }
  }
  return r;
}

std::vector<double> KolmogorovResidual::vjp(const Field& x, std::span<const double> g) const {
  const std::size_t n = spec_.n, np = n * n;
  Spectral2D sp(n);
  const double nu = 1.0 / spec_.re;
  const double dg = spec_.frame_spacing();
  const double drag = spec_.forcing_enabled ? spec_.drag : 0.0;
  std::vector<double> out(x.size(), 0.0);
  std::vector<double> tmp(np);
  for (std::size_t f = 1; f < spec_.frames; ++f) {
    const auto w = frame_of(x, f, np);
    const auto gf = g.subspan(f * np, np);
    const FrameTerms t = frame_terms(sp, w);
    double* of = out.data() + f * np;
    double* op = out.data() + (f - 1) * np;
    // Time difference, drag, and the symmetric viscous term.
    const auto lap_g = sp.laplacian(gf);
    for (std::size_t k = 0; k < np; ++k) {
      of[k] += gf[k] / dg + drag * gf[k] - nu * lap_g[k];
      op[k] -= gf[k] / dg;
    }
    // Transport of the perturbation: adjoint of v . grad(delta) is -div(v g).
    for (std::size_t k = 0; k < np; ++k) tmp[k] = t.v1[k] * gf[k];
    auto a = sp.d_dxi1(tmp);
    for (std::size_t k = 0; k < np; ++k) tmp[k] = t.v2[k] * gf[k];
    auto b = sp.d_dxi2(tmp);
    for (std::size_t k = 0; k < np; ++k) of[k] -= a[k] + b[k];
    // Velocity perturbation: v1 = D2 L^-1 delta, v2 = -D1 L^-1 delta.
    for (std::size_t k = 0; k < np; ++k) tmp[k] = gf[k] * t.w1[k];
    a = sp.d_dxi2(tmp);
    for (std::size_t k = 0; k < np; ++k) tmp[k] = gf[k] * t.w2[k];
    b = sp.d_dxi1(tmp);
    for (std::size_t k = 0; k < np; ++k) tmp[k] = -a[k] + b[k];
    const auto c = sp.inverse_laplacian(tmp);
    for (std::size_t k = 0; k < np; ++k) of[k] += c[k];
  }
  return out;
}

ResidualField residual_kolmogorov(const Field& omega, const KolmogorovSpec& spec) {
  if (omega.rank() != 3) throw ConfigError("kolmogorov residual: expected [frames, n, n]");
  if (omega.dims()[0] < 2) throw ConfigError("kolmogorov residual: need at least 2 frames");
  require_torus_frames(omega, "kolmogorov residual");
  require_zero_mean(omega, "kolmogorov residual");
  KolmogorovSpec s = spec;
  s.frames = omega.dims()[0];
  s.n = omega.dims()[1];
  return KolmogorovResidual(s).evaluate(omega);
}

std::unique_ptr<ResidualOperator> make_residual_operator(const ExperimentConfig& cfg, const Field* coef) {
  switch (cfg.benchmark) {
    case Benchmark::burgers: {
      const auto& b = cfg.solver.burgers;
      return std::make_unique<BurgersResidual>(cfg.dims, b.nu_hf, b.h(), b.dt());
    }
    case Benchmark::darcy: {
      if (!coef) throw ConfigError("darcy residual needs the permeability field");
      return std::make_unique<DarcyResidual>(*coef, cfg.solver.darcy.forcing, cfg.solver.darcy.h());
    }
    case Benchmark::kolmogorov:
      return std::make_unique<KolmogorovResidual>(cfg.solver.kolmogorov);
  }
  throw ConfigError("unknown benchmark");
}

ad::Var residual_rms(ad::Var x, const ResidualOperator& op) {
  const Dims& d = op.dims();
  if (x.size() != dims_product(d)) {
    throw ConfigError("residual_rms: state size " + std::to_string(x.size()) + " vs operator " + dims_string(d));
  }
  Field xf(d, std::vector<double>(x.value().begin(), x.value().end()));
  ResidualField r = op.evaluate(xf);
  const std::size_t count = r.valid_count();
  if (count == 0) throw ConfigError("residual_rms: no valid nodes");
  auto rv = ad::custom_unary(x, x.shape(), r.values.data(),
                             [&op, xf = std::move(xf), valid = r.valid](const std::vector<double>& g) {
                               std::vector<double> gm(g.size());
                               for (std::size_t i = 0; i < g.size(); ++i) gm[i] = valid[i] != 0.0 ? g[i] : 0.0;
                               return op.vjp(xf, gm);
                             });
  return ad::rms(rv, count);
}

ResidualFloorEstimate estimate_residual_floor(const ObservationSet& obs, const ResidualOperator& op,
                                              const Field& init, std::size_t iters, double step) {
  if (iters < 1) throw ConfigError("residual floor: iters must be >= 1");
  if (!(step > 0.0)) throw ConfigError("residual floor: step must be > 0");
  if (init.dims() != op.dims() || obs.dims() != op.dims()) throw ConfigError("residual floor: dims mismatch");

  ResidualFloorEstimate est;
  Field x = project(init, obs);
  ResidualField r = op.evaluate(x);
  const double start = residual_norm(r);
  est.value = start;
  est.best = x;
  est.history.push_back(start);

  std::size_t free_count = 0;
  for (double m : obs.mask.values()) free_count += m == 0.0 ? 1 : 0;
  if (free_count == 0) {
    est.converged = true;
    return est;
  }

  const double count = static_cast<double>(r.valid_count());
  double prev = start;
  bool diverged = false, settled = false;
  for (std::size_t it = 0; it < iters; ++it) {
    // d/dx of mean-square residual.
    std::vector<double> g(r.values.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = r.valid[i] != 0.0 ? 2.0 * r.values[i] / count : 0.0;
    const auto grad = op.vjp(x, g);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= step * grad[i];
    x = project(x, obs);
    r = op.evaluate(x);
    const double norm = residual_norm(r);
    est.iterations = it + 1;
    if (!std::isfinite(norm) || norm > 10.0 * start) {
      diverged = true;
      est.history.push_back(est.value);
      break;
    }
    if (norm < est.value) {
      est.value = norm;
      est.best = x;
    }
    est.history.push_back(est.value);
    settled = std::abs(prev - norm) <= 1e-10 * std::max(1.0, start);
    prev = norm;
  }
  est.converged = !diverged && settled;
  return est;
}

double burgers_error_bound(const Field& x_ref, double delta, double nu, double h, double dt, double length) {
  if (x_ref.rank() != 2 || x_ref.dims()[0] < 3 || x_ref.dims()[1] < 2) {
    throw ConfigError("error bound: reference must be a [space >= 3, time >= 2] field");
  }
  if (delta < 0.0) throw ConfigError("error bound: residual difference must be >= 0");
  if (!(h > 0.0) || !(dt > 0.0) || !(length > 0.0)) throw ConfigError("error bound: h, dt, L must be > 0");
  const std::size_t nx = x_ref.dims()[0], nt = x_ref.dims()[1];
  double min_grad = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < nt; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double gr = (x_ref.at((i + 1) % nx, j) - x_ref.at((i + nx - 1) % nx, j)) / (2.0 * h);
      min_grad = std::min(min_grad, gr);
    }
  const double denom = 1.0 / dt + nu * (kPi / length) * (kPi / length) + min_grad;
  if (!(denom > 0.0)) throw NumericalError("error bound: bound inapplicable (nonpositive denominator)");
  return delta / denom;
}

}  // namespace picsb
