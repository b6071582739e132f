#include "picsb/ad.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numeric>

#include "picsb/errors.hpp"

namespace picsb::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;

std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

const Shape& Var::shape() const { return tape_->shape(id_); }
std::span<const double> Var::value() const { return tape_->value(id_); }
std::size_t Var::size() const { return tape_->value(id_).size(); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }
double Var::scalar() const {
  if (size() != 1) throw ConfigError("scalar() on a non-scalar tensor");
  return tape_->value(id_)[0];
}

Var Tape::constant(Shape shape, std::vector<double> value) {
  if (shape_size(shape) != value.size()) throw ConfigError("ad: constant shape/value mismatch");
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Shape shape, std::vector<double> value) {
  if (shape_size(shape) != value.size()) throw ConfigError("ad: leaf shape/value mismatch");
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs,
                 Backward backward) {
  bool rg = false;
  for (const Var& v : inputs) rg = rg || (v.valid() && v.requires_grad());
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, rg ? std::move(backward) : Backward{}, rg});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Shape shape, std::vector<double> value, const std::vector<Var>& inputs,
                 Backward backward) {
  bool rg = false;
  for (const Var& v : inputs) rg = rg || (v.valid() && v.requires_grad());
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, rg ? std::move(backward) : Backward{}, rg});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return {};
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::accumulate(Var v, std::span<const double> g) {
  if (!v.valid() || !nodes_[v.id()].requires_grad) return;
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) {
    n.grad.assign(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n.value.size()));
    return;
  }
  for (std::size_t i = 0; i < n.grad.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(Var out) {
  if (out.size() != 1) throw ConfigError("ad: backward needs a single-element output");
  if (!nodes_[out.id()].requires_grad) return;
  grad_buffer(out)[0] += 1.0;
  for (std::size_t id = out.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    // Closures only touch their inputs' buffers (lower ids), never this one.
    std::vector<double> g = std::move(n.grad);
    n.backward(g);
    n.grad = std::move(g);
  }
}

std::vector<double> Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

namespace {

void check_same(Var a, Var b, const char* op) {
  if (a.size() != b.size()) {
    throw ConfigError(std::string("ad::") + op + ": size mismatch " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
  }
}

template <class F>
Var map_unary(Var a, F f, std::function<void(const std::vector<double>&, const std::vector<double>&,
                                             std::vector<double>&)> dfn) {
  const auto& x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Tape* t = a.tape();
  return t->record(a.shape(), std::move(y), {a}, [t, a, dfn](const std::vector<double>& g) {
    std::vector<double> gx(g.size());
    dfn(t->value(a.id()), g, gx);
    t->accumulate(a, gx);
  });
}

}  // namespace

Var add(Var a, Var b) {
  check_same(a, b, "add");
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  Tape* t = a.tape();
  return t->record(a.shape(), std::move(y), {a, b}, [t, a, b](const std::vector<double>& g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  Tape* t = a.tape();
  return t->record(a.shape(), std::move(y), {a, b}, [t, a, b](const std::vector<double>& g) {
    t->accumulate(a, g);
    if (b.requires_grad()) {
      std::vector<double> nb(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) nb[i] = -g[i];
      t->accumulate(b, nb);
    }
  });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  Tape* t = a.tape();
  return t->record(a.shape(), std::move(y), {a, b}, [t, a, b](const std::vector<double>& g) {
    const auto& av = t->value(a.id());
    const auto& bv = t->value(b.id());
    if (a.requires_grad()) {
      std::vector<double> ga(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * bv[i];
      t->accumulate(a, ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * av[i];
      t->accumulate(b, gb);
    }
  });
}

Var scale(Var a, double c) { return affine(a, c, 0.0); }

Var affine(Var a, double alpha, double beta) {
  return map_unary(
      a, [=](double x) { return alpha * x + beta; },
      [=](const std::vector<double>&, const std::vector<double>& g, std::vector<double>& gx) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = alpha * g[i];
      });
}

Var add_const(Var a, std::span<const double> c) {
  if (c.size() != a.size()) throw ConfigError("ad::add_const: size mismatch");
  const auto av = a.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + c[i];
  Tape* t = a.tape();
  return t->record(a.shape(), std::move(y), {a}, [t, a](const std::vector<double>& g) { t->accumulate(a, g); });
}

Var mul_const(Var a, std::span<const double> c) {
  if (c.size() != a.size()) throw ConfigError("ad::mul_const: size mismatch");
  const auto av = a.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * c[i];
  Tape* t = a.tape();
  std::vector<double> cc(c.begin(), c.end());
  return t->record(a.shape(), std::move(y), {a}, [t, a, cc = std::move(cc)](const std::vector<double>& g) {
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * cc[i];
    t->accumulate(a, ga);
  });
}

Var square(Var a) {
  return map_unary(
      a, [](double x) { return x * x; },
      [](const std::vector<double>& x, const std::vector<double>& g, std::vector<double>& gx) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = 2.0 * x[i] * g[i];
      });
}

Var silu(Var a) {
  return map_unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](const std::vector<double>& x, const std::vector<double>& g, std::vector<double>& gx) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = 1.0 / (1.0 + std::exp(-x[i]));
          gx[i] = g[i] * (s + x[i] * s * (1.0 - s));
        }
      });
}

Var tanh(Var a) {
  return map_unary(
      a, [](double x) { return std::tanh(x); },
      [](const std::vector<double>& x, const std::vector<double>& g, std::vector<double>& gx) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double th = std::tanh(x[i]);
          gx[i] = g[i] * (1.0 - th * th);
        }
      });
}

Var sin(Var a) {
  return map_unary(
      a, [](double x) { return std::sin(x); },
      [](const std::vector<double>& x, const std::vector<double>& g, std::vector<double>& gx) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * std::cos(x[i]);
      });
}

Var cos(Var a) {
  return map_unary(
      a, [](double x) { return std::cos(x); },
      [](const std::vector<double>& x, const std::vector<double>& g, std::vector<double>& gx) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = -g[i] * std::sin(x[i]);
      });
}

Var sum(Var a) {
  const auto av = a.value();
  double s = 0.0;
  for (double v : av) s += v;
  Tape* t = a.tape();
  const std::size_t n = av.size();
  return t->record({1}, {s}, {a}, [t, a, n](const std::vector<double>& g) {
    t->accumulate(a, std::vector<double>(n, g[0]));
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var sum_squares(Var a) {
  const auto av = a.value();
  double s = 0.0;
  for (double v : av) s += v * v;
  Tape* t = a.tape();
  return t->record({1}, {s}, {a}, [t, a](const std::vector<double>& g) {
    const auto& x = t->value(a.id());
    std::vector<double> gx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = 2.0 * x[i] * g[0];
    t->accumulate(a, gx);
  });
}

Var rms(Var a, std::size_t count) {
  if (count == 0) throw ConfigError("ad::rms: zero count");
  const auto av = a.value();
  double s = 0.0;
  for (double v : av) s += v * v;
  const double r = std::sqrt(s / static_cast<double>(count));
  Tape* t = a.tape();
  return t->record({1}, {r}, {a}, [t, a, r, count](const std::vector<double>& g) {
    if (r == 0.0) throw NumericalError("rms gradient undefined at a zero residual");
    const auto& x = t->value(a.id());
    std::vector<double> gx(x.size());
    const double c = g[0] / (static_cast<double>(count) * r);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = c * x[i];
    t->accumulate(a, gx);
  });
}

Var sqrt_scalar(Var a) {
  if (a.size() != 1) throw ConfigError("ad::sqrt_scalar: non-scalar input");
  const double v = a.value()[0];
  if (v < 0.0) throw NumericalError("ad::sqrt_scalar: negative input");
  const double r = std::sqrt(v);
  Tape* t = a.tape();
  return t->record({1}, {r}, {a}, [t, a, r](const std::vector<double>& g) {
    if (r == 0.0) throw NumericalError("sqrt gradient undefined at zero");
    t->accumulate(a, std::vector<double>{g[0] / (2.0 * r)});
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.size()) throw ConfigError("ad::reshape: size mismatch");
  Tape* t = a.tape();
  std::vector<double> v(a.value().begin(), a.value().end());
  return t->record(std::move(shape), std::move(v), {a}, [t, a](const std::vector<double>& g) { t->accumulate(a, g); });
}

Var slice(Var a, std::size_t offset, Shape shape) {
  const std::size_t n = shape_size(shape);
  if (offset + n > a.size()) throw ConfigError("ad::slice: out of range");
  const auto av = a.value();
  std::vector<double> v(av.begin() + static_cast<std::ptrdiff_t>(offset),
                        av.begin() + static_cast<std::ptrdiff_t>(offset + n));
  Tape* t = a.tape();
  return t->record(std::move(shape), std::move(v), {a}, [t, a, offset](const std::vector<double>& g) {
    auto buf = t->grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) buf[offset + i] += g[i];
  });
}

Var concat0(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("ad::concat0: no inputs");
  Shape shape = parts[0].shape();
  std::size_t lead = 0;
  std::vector<double> v;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1)) {
      throw ConfigError("ad::concat0: trailing shape mismatch");
    }
    lead += s[0];
    v.insert(v.end(), p.value().begin(), p.value().end());
  }
  shape[0] = lead;
  Tape* t = parts[0].tape();
  return t->record(std::move(shape), std::move(v), parts, [t, parts](const std::vector<double>& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t n = p.size();
      if (p.requires_grad()) t->accumulate(p, std::span<const double>(g.data() + off, n));
      off += n;
    }
  });
}

Var project(Var x, std::span<const double> mask, std::span<const double> y) {
  if (mask.size() != x.size() || y.size() != x.size()) throw ConfigError("ad::project: size mismatch");
  const auto xv = x.value();
  std::vector<double> out(xv.size());
  std::vector<double> keep(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mask[i] != 0.0 ? y[i] : xv[i];
    keep[i] = mask[i] != 0.0 ? 0.0 : 1.0;
  }
  Tape* t = x.tape();
  return t->record(x.shape(), std::move(out), {x}, [t, x, keep = std::move(keep)](const std::vector<double>& g) {
    std::vector<double> gx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = keep[i] * g[i];
    t->accumulate(x, gx);
  });
}

namespace {

std::ptrdiff_t pad_index(std::ptrdiff_t i, std::ptrdiff_t n, Padding p) {
  if (i >= 0 && i < n) return i;
  switch (p) {
    case Padding::circular:
      return ((i % n) + n) % n;
    case Padding::reflect: {
      if (n == 1) return 0;
      const std::ptrdiff_t period = 2 * (n - 1);
      std::ptrdiff_t m = ((i % period) + period) % period;
      return m < n ? m : period - m;
    }
    case Padding::zero:
      return -1;
  }
  return -1;
}

}  // namespace

Var conv2d(Var x, Var w, Var b, std::size_t stride, Padding padding) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3]) {
    throw ConfigError("ad::conv2d: expected x [Cin,H,W] and w [Cout,Cin,k,k] with matching Cin");
  }
  if (b.size() != ws[0]) throw ConfigError("ad::conv2d: bias length mismatch");
  const std::size_t cin = xs[0], h = xs[1], wd = xs[2];
  const std::size_t cout = ws[0], k = ws[2];
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
  const std::size_t rows = cin * k * k, cols = ho * wo;

  // im2col gather table; -1 marks a zero-padded tap.
  auto index = std::make_shared<std::vector<std::ptrdiff_t>>(rows * cols);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::size_t r = (ci * k + ky) * k + kx;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = pad_index(static_cast<std::ptrdiff_t>(oy * stride + ky) - half,
                                              static_cast<std::ptrdiff_t>(h), padding);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = pad_index(static_cast<std::ptrdiff_t>(ox * stride + kx) - half,
                                                static_cast<std::ptrdiff_t>(wd), padding);
            (*index)[r * cols + oy * wo + ox] =
                (iy < 0 || ix < 0) ? -1 : static_cast<std::ptrdiff_t>((ci * h + iy) * wd + ix);
          }
        }
      }

  auto col = std::make_shared<RowMat>(rows, cols);
  {
    const auto xv = x.value();
    double* c = col->data();
    for (std::size_t i = 0; i < rows * cols; ++i) c[i] = (*index)[i] < 0 ? 0.0 : xv[(*index)[i]];
  }
  std::vector<double> out(cout * cols);
  {
    CMapMat wm(w.value().data(), cout, rows);
    MapMat om(out.data(), cout, cols);
    om.noalias() = wm * (*col);
    const auto bv = b.value();
    for (std::size_t co = 0; co < cout; ++co) om.row(co).array() += bv[co];
  }
  Tape* t = x.tape();
  return t->record({cout, ho, wo}, std::move(out), {x, w, b},
                   [t, x, w, b, index, col, cout, rows, cols](const std::vector<double>& g) {
                     CMapMat gm(g.data(), cout, cols);
                     if (w.requires_grad()) {
                       RowMat gw = gm * col->transpose();
                       t->accumulate(w, std::span<const double>(gw.data(), gw.size()));
                     }
                     if (b.requires_grad()) {
                       Eigen::VectorXd gb = gm.rowwise().sum();
                       t->accumulate(b, std::span<const double>(gb.data(), gb.size()));
                     }
                     if (x.requires_grad()) {
                       CMapMat wm(t->value(w.id()).data(), cout, rows);
                       RowMat gcol = wm.transpose() * gm;
                       auto gx = t->grad_buffer(x);
                       const double* gc = gcol.data();
                       for (std::size_t i = 0; i < rows * cols; ++i)
                         if ((*index)[i] >= 0) gx[(*index)[i]] += gc[i];
                     }
                   });
}

Var instance_norm(Var x, double eps) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw ConfigError("ad::instance_norm: expected [C,H,W]");
  const std::size_t c = xs[0], n = xs[1] * xs[2];
  const auto xv = x.value();
  std::vector<double> y(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = xv.data() + ch * n;
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += p[i];
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (p[i] - m) * (p[i] - m);
    var /= static_cast<double>(n);
    const double r = 1.0 / std::sqrt(var + eps);
    (*inv_std)[ch] = r;
    for (std::size_t i = 0; i < n; ++i) y[ch * n + i] = (p[i] - m) * r;
  }
  Tape* t = x.tape();
  auto ycopy = std::make_shared<std::vector<double>>(y);
  return t->record(xs, std::move(y), {x}, [t, x, inv_std, c, n, ycopy](const std::vector<double>& g) {
    const auto& yv = *ycopy;
    std::vector<double> gx(g.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* gy = g.data() + ch * n;
      const double* yy = yv.data() + ch * n;
      double mg = 0.0, mgy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mg += gy[i];
        mgy += gy[i] * yy[i];
      }
      mg /= static_cast<double>(n);
      mgy /= static_cast<double>(n);
      const double r = (*inv_std)[ch];
      for (std::size_t i = 0; i < n; ++i) gx[ch * n + i] = r * (gy[i] - mg - yy[i] * mgy);
    }
    t->accumulate(x, gx);
  });
}

Var channel_affine(Var x, Var gamma, Var beta) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || gamma.size() != xs[0] || beta.size() != xs[0]) {
    throw ConfigError("ad::channel_affine: channel mismatch");
  }
  const std::size_t c = xs[0], n = xs[1] * xs[2];
  const auto xv = x.value();
  const auto gv = gamma.value();
  const auto bv = beta.value();
  std::vector<double> y(xv.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < n; ++i) y[ch * n + i] = gv[ch] * xv[ch * n + i] + bv[ch];
  Tape* t = x.tape();
  return t->record(xs, std::move(y), {x, gamma, beta}, [t, x, gamma, beta, c, n](const std::vector<double>& g) {
    const auto& xv = t->value(x.id());
    const auto& gv = t->value(gamma.id());
    if (x.requires_grad()) {
      std::vector<double> gx(g.size());
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < n; ++i) gx[ch * n + i] = gv[ch] * g[ch * n + i];
      t->accumulate(x, gx);
    }
    if (gamma.requires_grad() || beta.requires_grad()) {
      std::vector<double> gg(c, 0.0), gb(c, 0.0);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < n; ++i) {
          gg[ch] += g[ch * n + i] * xv[ch * n + i];
          gb[ch] += g[ch * n + i];
        }
      t->accumulate(gamma, gg);
      t->accumulate(beta, gb);
    }
  });
}

Var upsample2x(Var x) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw ConfigError("ad::upsample2x: expected [C,H,W]");
  const std::size_t c = xs[0], h = xs[1], w = xs[2];
  const auto xv = x.value();
  std::vector<double> y(c * 4 * h * w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j) y[(ch * 2 * h + i) * 2 * w + j] = xv[(ch * h + i / 2) * w + j / 2];
  Tape* t = x.tape();
  return t->record({c, 2 * h, 2 * w}, std::move(y), {x}, [t, x, c, h, w](const std::vector<double>& g) {
    std::vector<double> gx(c * h * w, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < 2 * h; ++i)
        for (std::size_t j = 0; j < 2 * w; ++j) gx[(ch * h + i / 2) * w + j / 2] += g[(ch * 2 * h + i) * 2 * w + j];
    t->accumulate(x, gx);
  });
}

Var linear(Var x, Var w, Var b) {
  const std::size_t in = x.size();
  const Shape& ws = w.shape();
  if (ws.size() != 2 || ws[1] != in || b.size() != ws[0]) throw ConfigError("ad::linear: shape mismatch");
  const std::size_t out = ws[0];
  std::vector<double> y(out);
  {
    CMapMat wm(w.value().data(), out, in);
    CMapVec xv(x.value().data(), in);
    CMapVec bv(b.value().data(), out);
    MapVec(y.data(), out) = wm * xv + bv;
  }
  Tape* t = x.tape();
  return t->record({out}, std::move(y), {x, w, b}, [t, x, w, b, in, out](const std::vector<double>& g) {
    CMapVec gv(g.data(), out);
    if (w.requires_grad()) {
      CMapVec xv(t->value(x.id()).data(), in);
      RowMat gw = gv * xv.transpose();
      t->accumulate(w, std::span<const double>(gw.data(), gw.size()));
    }
    t->accumulate(b, g);
    if (x.requires_grad()) {
      CMapMat wm(t->value(w.id()).data(), out, in);
      Eigen::VectorXd gx = wm.transpose() * gv;
      t->accumulate(x, std::span<const double>(gx.data(), gx.size()));
    }
  });
}

Var dense(Var x, Var w, Var b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || ws[1] != xs[1]) throw ConfigError("ad::dense: shape mismatch");
  const std::size_t n = xs[0], in = xs[1], out = ws[0];
  const bool has_bias = b.valid();
  if (has_bias && b.size() != out) throw ConfigError("ad::dense: bias length mismatch");
  std::vector<double> y(n * out);
  {
    CMapMat xm(x.value().data(), n, in);
    CMapMat wm(w.value().data(), out, in);
    MapMat ym(y.data(), n, out);
    ym.noalias() = xm * wm.transpose();
    if (has_bias) {
      CMapVec bv(b.value().data(), out);
      ym.rowwise() += bv.transpose();
    }
  }
  Tape* t = x.tape();
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return t->record({n, out}, std::move(y), inputs, [t, x, w, b, has_bias, n, in, out](const std::vector<double>& g) {
    CMapMat gm(g.data(), n, out);
    if (w.requires_grad()) {
      CMapMat xm(t->value(x.id()).data(), n, in);
      RowMat gw = gm.transpose() * xm;
      t->accumulate(w, std::span<const double>(gw.data(), gw.size()));
    }
    if (has_bias && b.requires_grad()) {
      Eigen::VectorXd gb = gm.colwise().sum().transpose();
      t->accumulate(b, std::span<const double>(gb.data(), gb.size()));
    }
    if (x.requires_grad()) {
      CMapMat wm(t->value(w.id()).data(), out, in);
      RowMat gx = gm * wm;
      t->accumulate(x, std::span<const double>(gx.data(), gx.size()));
    }
  });
}

Var custom_unary(Var x, Shape out_shape, std::vector<double> out_value,
                 std::function<std::vector<double>(const std::vector<double>& grad_out)> vjp) {
  Tape* t = x.tape();
  return t->record(std::move(out_shape), std::move(out_value), {x},
                   [t, x, vjp = std::move(vjp)](const std::vector<double>& g) { t->accumulate(x, vjp(g)); });
}

}  // namespace picsb::ad
