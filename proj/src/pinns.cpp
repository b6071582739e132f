#include <chrono>
#include <cmath>
#include <numbers>

#include "picsb/ad.hpp"
#include "picsb/baselines.hpp"
#include "picsb/bridge.hpp"
#include "picsb/errors.hpp"

namespace picsb {

namespace {

constexpr double kPi = std::numbers::pi;
using Coords = std::vector<std::array<double, 3>>;

// Input features and their coordinate derivatives, each [N, nf] row-major.
struct Features {
  std::size_t n = 0, nf = 0;
  std::vector<double> f;
  std::vector<std::vector<double>> fk, fkk;
};

Features make_features(const PinnModel& m, const ExperimentConfig& cfg, const Coords& x) {
  Features F;
  F.n = x.size();
  F.nf = m.feature_dim;
  const std::size_t K = m.coord_dim;
  F.f.assign(F.n * F.nf, 0.0);
  F.fk.assign(K, std::vector<double>(F.n * F.nf, 0.0));
  F.fkk.assign(K, std::vector<double>(F.n * F.nf, 0.0));
  switch (m.benchmark) {
    case Benchmark::burgers: {
      const double tend = cfg.solver.burgers.t_end;
      for (std::size_t p = 0; p < F.n; ++p) {
        F.f[p * 2] = 2.0 * x[p][0] - 1.0;
        F.f[p * 2 + 1] = 2.0 * x[p][1] / tend - 1.0;
        F.fk[0][p * 2] = 2.0;
        F.fk[1][p * 2 + 1] = 2.0 / tend;
      }
      break;
    }
    case Benchmark::darcy: {
      for (std::size_t p = 0; p < F.n; ++p) {
        F.f[p * 2] = 2.0 * x[p][0] - 1.0;
        F.f[p * 2 + 1] = 2.0 * x[p][1] - 1.0;
        F.fk[0][p * 2] = 2.0;
        F.fk[1][p * 2 + 1] = 2.0;
      }
      break;
    }
    case Benchmark::kolmogorov: {
      // Periodic encoding of the torus plus scaled time.
      const double tend = cfg.solver.kolmogorov.t_end;
      for (std::size_t p = 0; p < F.n; ++p) {
        double* r = &F.f[p * 5];
        const double s1 = std::sin(x[p][0]), c1 = std::cos(x[p][0]);
        const double s2 = std::sin(x[p][1]), c2 = std::cos(x[p][1]);
        r[0] = s1, r[1] = c1, r[2] = s2, r[3] = c2, r[4] = 2.0 * x[p][2] / tend - 1.0;
        F.fk[0][p * 5] = c1, F.fk[0][p * 5 + 1] = -s1;
        F.fk[1][p * 5 + 2] = c2, F.fk[1][p * 5 + 3] = -s2;
        F.fk[2][p * 5 + 4] = 2.0 / tend;
        F.fkk[0][p * 5] = -s1, F.fkk[0][p * 5 + 1] = -c1;
        F.fkk[1][p * 5 + 2] = -s2, F.fkk[1][p * 5 + 3] = -c2;
      }
      break;
    }
  }
  return F;
}

struct Layer {
  ad::Var w, b;
};

std::vector<Layer> layers_of(const PinnModel& m, ad::Var flat) {
  std::vector<Layer> out;
  std::size_t off = 0, in = m.feature_dim;
  for (std::size_t l = 0; l <= m.depth; ++l) {
    const std::size_t o = l == m.depth ? m.out_dim : m.width;
    Layer L;
    L.w = ad::slice(flat, off, {o, in});
    off += o * in;
    L.b = ad::slice(flat, off, {o});
    off += o;
    out.push_back(L);
    in = o;
  }
  return out;
}

// Output column c of the final layer, as [N, 1].
ad::Var out_col(const PinnModel& m, const Layer& last, ad::Var h, std::size_t c, bool bias) {
  ad::Var w = ad::reshape(ad::slice(last.w, c * m.width, {m.width}), {1, m.width});
  ad::Var b = bias ? ad::slice(last.b, c, {1}) : ad::Var{};
  return ad::dense(h, w, b);
}

std::vector<ad::Var> forward_value(const PinnModel& m, ad::Var flat, const Features& F) {
  ad::Tape* t = flat.tape();
  const auto L = layers_of(m, flat);
  ad::Var h = t->constant({F.n, F.nf}, F.f);
  for (std::size_t l = 0; l < m.depth; ++l) h = ad::tanh(ad::dense(h, L[l].w, L[l].b));
  std::vector<ad::Var> out;
  for (std::size_t c = 0; c < m.out_dim; ++c) out.push_back(out_col(m, L[m.depth], h, c, true));
  return out;
}

// Value, first and pure second derivatives per output column.
struct Jet {
  ad::Var u;
  std::vector<ad::Var> uk, ukk;
};

std::vector<Jet> forward_jet(const PinnModel& m, ad::Var flat, const Features& F) {
  ad::Tape* t = flat.tape();
  const auto L = layers_of(m, flat);
  const std::size_t K = m.coord_dim;
  ad::Var h = t->constant({F.n, F.nf}, F.f);
  std::vector<ad::Var> hk(K), hkk(K);
  for (std::size_t k = 0; k < K; ++k) {
    hk[k] = t->constant({F.n, F.nf}, F.fk[k]);
    hkk[k] = t->constant({F.n, F.nf}, F.fkk[k]);
  }
  for (std::size_t l = 0; l < m.depth; ++l) {
    ad::Var z = ad::tanh(ad::dense(h, L[l].w, L[l].b));
    ad::Var s = ad::affine(ad::square(z), -1.0, 1.0);
    ad::Var zs2 = ad::scale(ad::mul(z, s), 2.0);
    for (std::size_t k = 0; k < K; ++k) {
      ad::Var ak = ad::dense(hk[k], L[l].w, ad::Var{});
      ad::Var akk = ad::dense(hkk[k], L[l].w, ad::Var{});
      hk[k] = ad::mul(s, ak);
      hkk[k] = ad::sub(ad::mul(s, akk), ad::mul(zs2, ad::square(ak)));
    }
    h = z;
  }
  std::vector<Jet> out(m.out_dim);
  for (std::size_t c = 0; c < m.out_dim; ++c) {
    out[c].u = out_col(m, L[m.depth], h, c, true);
    for (std::size_t k = 0; k < K; ++k) {
      out[c].uk.push_back(out_col(m, L[m.depth], hk[k], c, false));
      out[c].ukk.push_back(out_col(m, L[m.depth], hkk[k], c, false));
    }
  }
  return out;
}

// Bilinear permeability and its gradient at (xi_1 = column, xi_2 = row).
struct Coef {
  std::vector<double> a, a1, a2;
};

Coef coef_at(const Field& coef, double h, const Coords& x) {
  const std::size_t n = coef.dims()[0];
  Coef c;
  for (const auto& p : x) {
    const double gx = std::clamp(p[0] / h, 0.0, static_cast<double>(n - 1));
    const double gy = std::clamp(p[1] / h, 0.0, static_cast<double>(n - 1));
    const std::size_t j0 = std::min<std::size_t>(static_cast<std::size_t>(gx), n - 2);
    const std::size_t i0 = std::min<std::size_t>(static_cast<std::size_t>(gy), n - 2);
    const double tx = gx - static_cast<double>(j0), ty = gy - static_cast<double>(i0);
    const double a00 = coef.at(i0, j0), a01 = coef.at(i0, j0 + 1);
    const double a10 = coef.at(i0 + 1, j0), a11 = coef.at(i0 + 1, j0 + 1);
    c.a.push_back((1 - ty) * ((1 - tx) * a00 + tx * a01) + ty * ((1 - tx) * a10 + tx * a11));
    c.a1.push_back(((1 - ty) * (a01 - a00) + ty * (a11 - a10)) / h);
    c.a2.push_back(((1 - tx) * (a10 - a00) + tx * (a11 - a01)) / h);
  }
  return c;
}

// Residual terms (each [N, 1]); the loss is the sum of their mean squares.
std::vector<ad::Var> residual_terms(const PinnModel& m, const ExperimentConfig& cfg, const Field* coef, ad::Var flat,
                                    const Coords& x) {
  ad::Tape* t = flat.tape();
  const Features F = make_features(m, cfg, x);
  const auto J = forward_jet(m, flat, F);
  const std::size_t n = x.size();
  switch (m.benchmark) {
    case Benchmark::burgers: {
      const double nu = cfg.solver.burgers.nu_hf;
      const Jet& u = J[0];
      return {ad::sub(ad::add(u.uk[1], ad::mul(u.u, u.uk[0])), ad::scale(u.ukk[0], nu))};
    }
    case Benchmark::darcy: {
      if (!coef) throw ConfigError("pinns: darcy needs the permeability field");
      const Coef c = coef_at(*coef, cfg.solver.darcy.h(), x);
      const Jet& u = J[0];
      ad::Var lap = ad::add(u.ukk[0], u.ukk[1]);
      ad::Var r = ad::add(ad::mul_const(lap, c.a),
                          ad::add(ad::mul_const(u.uk[0], c.a1), ad::mul_const(u.uk[1], c.a2)));
      std::vector<double> f(n, cfg.solver.darcy.forcing);
      return {ad::add_const(ad::scale(r, -1.0), std::vector<double>(n, -cfg.solver.darcy.forcing))};
    }
    case Benchmark::kolmogorov: {
      const auto& ks = cfg.solver.kolmogorov;
      const Jet& w = J[0];
      const Jet& psi = J[1];
      std::vector<double> forcing(n, 0.0);
      if (ks.forcing_enabled)
        for (std::size_t p = 0; p < n; ++p) forcing[p] = ks.forcing_amplitude * std::cos(ks.forcing_wavenumber * x[p][1]);
      const double drag = ks.forcing_enabled ? ks.drag : 0.0;
      ad::Var adv = ad::sub(ad::mul(psi.uk[1], w.uk[0]), ad::mul(psi.uk[0], w.uk[1]));
      ad::Var r1 = ad::add(ad::add(w.uk[2], adv), ad::scale(ad::add(w.ukk[0], w.ukk[1]), -1.0 / ks.re));
      r1 = ad::add_const(ad::add(r1, ad::scale(w.u, drag)), forcing);
      ad::Var r2 = ad::sub(ad::add(psi.ukk[0], psi.ukk[1]), w.u);
      return {r1, r2};
    }
  }
  (void)t;
  return {};
}

Coords collocation(const ExperimentConfig& cfg, std::size_t n, RngStream& rng) {
  Coords x(n);
  for (auto& p : x) {
    switch (cfg.benchmark) {
      case Benchmark::burgers:
        p = {rng.uniform(), rng.uniform(0.0, cfg.solver.burgers.t_end), 0.0};
        break;
      case Benchmark::darcy:
        p = {rng.uniform(), rng.uniform(), 0.0};
        break;
      case Benchmark::kolmogorov: {
        const auto& k = cfg.solver.kolmogorov;
        p = {rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.0, 2.0 * kPi), rng.uniform(k.frame_spacing(), k.t_end)};
        break;
      }
    }
  }
  return x;
}

Coords boundary_points(std::size_t n, RngStream& rng) {
  Coords x(n);
  for (auto& p : x) {
    const double s = rng.uniform();
    switch (rng.uniform_index(4)) {
      case 0:
        p = {s, 0.0, 0.0};
        break;
      case 1:
        p = {s, 1.0, 0.0};
        break;
      case 2:
        p = {0.0, s, 0.0};
        break;
      default:
        p = {1.0, s, 0.0};
        break;
    }
  }
  return x;
}

}  // namespace

std::size_t pinn_param_count(std::size_t in_dim, std::size_t width, std::size_t depth, std::size_t out_dim) {
  return (in_dim + 1) * width + (depth - 1) * (width + 1) * width + (width + 1) * out_dim;
}

PinnModel pinn_init(const ExperimentConfig& cfg, RngStream& rng) {
  const auto& pc = cfg.baselines.pinns;
  pc.validate();
  PinnModel m;
  m.benchmark = cfg.benchmark;
  m.width = pc.width;
  m.depth = pc.depth;
  switch (cfg.benchmark) {
    case Benchmark::burgers:
      m.coord_dim = 2, m.feature_dim = 2, m.out_dim = 1;
      break;
    case Benchmark::darcy:
      m.coord_dim = 2, m.feature_dim = 2, m.out_dim = 1;
      break;
    case Benchmark::kolmogorov:
      m.coord_dim = 3, m.feature_dim = 5, m.out_dim = 2;
      break;
  }
  m.flat.reserve(pinn_param_count(m.feature_dim, m.width, m.depth, m.out_dim));
  std::size_t in = m.feature_dim;
  for (std::size_t l = 0; l <= m.depth; ++l) {
    const std::size_t o = l == m.depth ? m.out_dim : m.width;
    const double bound = std::sqrt(6.0 / static_cast<double>(in + o));
    for (std::size_t i = 0; i < o * in; ++i) m.flat.push_back(rng.uniform(-bound, bound));
    for (std::size_t i = 0; i < o; ++i) m.flat.push_back(0.0);
    in = o;
  }
  return m;
}

std::vector<double> pinn_predict(const PinnModel& m, const std::vector<std::array<double, 3>>& coords) {
  ad::Tape tape;
  ad::Var flat = tape.constant({m.flat.size()}, m.flat);
  ExperimentConfig cfg = default_config(m.benchmark);
  const Features F = make_features(m, cfg, coords);
  const auto cols = forward_value(m, flat, F);
  std::vector<double> out(coords.size() * m.out_dim);
  for (std::size_t c = 0; c < m.out_dim; ++c)
    for (std::size_t p = 0; p < coords.size(); ++p) out[p * m.out_dim + c] = cols[c].value()[p];
  return out;
}

std::vector<double> pinn_residual(const PinnModel& m, const ExperimentConfig& cfg, const Field* coef,
                                  const std::vector<std::array<double, 3>>& coords) {
  ad::Tape tape;
  ad::Var flat = tape.constant({m.flat.size()}, m.flat);
  const auto terms = residual_terms(m, cfg, coef, flat, coords);
  return {terms[0].value().begin(), terms[0].value().end()};
}

std::vector<std::array<double, 3>> grid_coords(const ExperimentConfig& cfg) {
  Coords x;
  switch (cfg.benchmark) {
    case Benchmark::burgers: {
      const auto& b = cfg.solver.burgers;
      for (std::size_t i = 0; i < b.nx; ++i)
        for (std::size_t j = 0; j < b.nt; ++j) x.push_back({static_cast<double>(i) * b.h(), static_cast<double>(j) * b.dt(), 0.0});
      break;
    }
    case Benchmark::darcy: {
      const auto& d = cfg.solver.darcy;
      for (std::size_t i = 0; i < d.n; ++i)
        for (std::size_t j = 0; j < d.n; ++j) x.push_back({static_cast<double>(j) * d.h(), static_cast<double>(i) * d.h(), 0.0});
      break;
    }
    case Benchmark::kolmogorov: {
      const auto& k = cfg.solver.kolmogorov;
      for (std::size_t f = 0; f < k.frames; ++f)
        for (std::size_t i = 0; i < k.n; ++i)
          for (std::size_t j = 0; j < k.n; ++j)
            x.push_back({static_cast<double>(j) * k.h(), static_cast<double>(i) * k.h(),
                         static_cast<double>(f + 1) * k.frame_spacing()});
      break;
    }
  }
  return x;
}

PinnsResult pinns_fit(const ObservationSet& obs, const ExperimentConfig& cfg, const Field* coef, RngStream& rng) {
  const auto& pc = cfg.baselines.pinns;
  pc.validate();
  if (obs.empty()) throw ConfigError("pinns: empty observation set");
  if (obs.dims() != cfg.dims) throw ConfigError("pinns: observation dims do not match the config");
  const auto start = std::chrono::steady_clock::now();

  RngStream init_rng = rng.fork("init");
  PinnsResult res;
  res.model = pinn_init(cfg, init_rng);
  PinnModel& m = res.model;

  const Coords all = grid_coords(cfg);
  Coords xo;
  std::vector<double> yo;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (obs.mask[i] != 0.0) {
      xo.push_back(all[i]);
      yo.push_back(obs.values[i]);
    }
  const Features Fo = make_features(m, cfg, xo);

  AdamState adam;
  std::vector<double> best = m.flat;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t ep = 0; ep < pc.epochs; ++ep) {
    RngStream er = rng.fork("epoch", ep);
    ad::Tape tape;
    ad::Var flat = tape.leaf({m.flat.size()}, m.flat);
    ad::Var loss = tape.constant_scalar(0.0);
    if (pc.lambda_obs > 0.0) {
      ad::Var u = forward_value(m, flat, Fo)[0];
      ad::Var d = ad::add_const(u, std::vector<double>(yo.size(), 0.0));
      std::vector<double> neg(yo.size());
      for (std::size_t i = 0; i < yo.size(); ++i) neg[i] = -yo[i];
      d = ad::add_const(u, neg);
      loss = ad::add(loss, ad::scale(ad::mean(ad::square(d)), pc.lambda_obs));
    }
    if (pc.lambda_phys > 0.0) {
      const Coords xc = collocation(cfg, pc.colloc, er);
      for (ad::Var r : residual_terms(m, cfg, coef, flat, xc)) {
        loss = ad::add(loss, ad::scale(ad::mean(ad::square(r)), pc.lambda_phys));
      }
    }
    if (cfg.benchmark == Benchmark::darcy && pc.lambda_bc > 0.0) {
      const Coords xb = boundary_points(pc.n_bc, er);
      ad::Var ub = forward_value(m, flat, make_features(m, cfg, xb))[0];
      loss = ad::add(loss, ad::scale(ad::mean(ad::square(ub)), pc.lambda_bc));
    }
    const double lv = loss.scalar();
    if (!std::isfinite(lv)) {
      res.aborted = true;
      break;
    }
    res.loss_history.push_back(lv);
    if (lv < best_loss) {
      best_loss = lv;
      best = m.flat;
    }
    tape.backward(loss);
    auto g = tape.grad(flat);
    bool finite = true;
    for (double v : g) finite = finite && std::isfinite(v);
    if (!finite) {
      res.aborted = true;
      break;
    }
    adam_step(m.flat, std::move(g), adam, pc.lr, pc.grad_clip);
  }
  if (res.aborted) m.flat = best;

  const auto pred = pinn_predict(m, all);
  Field out(cfg.dims, obs.mask.axis_tags());
  for (std::size_t i = 0; i < all.size(); ++i) out[i] = pred[i * m.out_dim];
  res.prediction = std::move(out);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace picsb
