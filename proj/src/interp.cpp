#include <cmath>
#include <limits>

#include "picsb/errors.hpp"
#include "picsb/observation.hpp"
#include "picsb/pde.hpp"

namespace picsb {

namespace {

// Keys cubic convolution kernel, a = -0.5.
double keys(double t) {
  const double a = -0.5;
  t = std::abs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
  return 0.0;
}

struct Plane {
  std::size_t rows, cols;
};

// Nearest observed node for every grid node; ties go to the first observed
// point in raster order.
std::vector<double> nearest_fill(const double* mask, const double* vals, Plane p, bool periodic) {
  std::vector<std::size_t> pts;
  for (std::size_t k = 0; k < p.rows * p.cols; ++k)
    if (mask[k] != 0.0) pts.push_back(k);
  std::vector<double> out(p.rows * p.cols);
  for (std::size_t i = 0; i < p.rows; ++i)
    for (std::size_t j = 0; j < p.cols; ++j) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = pts.front();
      for (std::size_t k : pts) {
        double di = std::abs(static_cast<double>(k / p.cols) - static_cast<double>(i));
        double dj = std::abs(static_cast<double>(k % p.cols) - static_cast<double>(j));
        if (periodic) {
          di = std::min(di, static_cast<double>(p.rows) - di);
          dj = std::min(dj, static_cast<double>(p.cols) - dj);
        }
        const double d = di * di + dj * dj;
        if (d < best) {
          best = d;
          arg = k;
        }
      }
      out[i * p.cols + j] = vals[arg];
    }
  return out;
}

std::size_t tap(std::ptrdiff_t idx, std::size_t n, bool periodic) {
  const auto ni = static_cast<std::ptrdiff_t>(n);
  if (periodic) return static_cast<std::size_t>(((idx % ni) + ni) % ni);
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, ni - 1));
}

// Separable Keys-kernel smoothing with support scaled by s >= 1 (s = 1 is
// the identity on grid nodes).
std::vector<double> cubic_smooth(const std::vector<double>& f, Plane p, double s, bool periodic) {
  if (s <= 1.0) return f;
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(2.0 * s));
  std::vector<double> w;
  double wsum = 0.0;
  for (std::ptrdiff_t d = -r; d <= r; ++d) {
    w.push_back(keys(static_cast<double>(d) / s));
    wsum += w.back();
  }
  for (auto& v : w) v /= wsum;
  std::vector<double> tmp(f.size()), out(f.size());
  for (std::size_t i = 0; i < p.rows; ++i)
    for (std::size_t j = 0; j < p.cols; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        acc += w[static_cast<std::size_t>(d + r)] *
               f[i * p.cols + tap(static_cast<std::ptrdiff_t>(j) + d, p.cols, periodic)];
      tmp[i * p.cols + j] = acc;
    }
  for (std::size_t i = 0; i < p.rows; ++i)
    for (std::size_t j = 0; j < p.cols; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        acc += w[static_cast<std::size_t>(d + r)] *
               tmp[tap(static_cast<std::ptrdiff_t>(i) + d, p.rows, periodic) * p.cols + j];
      out[i * p.cols + j] = acc;
    }
  return out;
}

}  // namespace

Field make_lf_interp(const ObservationSet& obs, InterpMethod method, bool periodic) {
  const Dims& d = obs.dims();
  if (d.size() != 2 && d.size() != 3) throw ConfigError("make_lf_interp: expected [n, m] or [frames, n, m]");
  const std::size_t frames = d.size() == 3 ? d[0] : 1;
  const Plane p{d[d.size() - 2], d[d.size() - 1]};
  const std::size_t np = p.rows * p.cols;
  Field out(d, obs.mask.axis_tags());
  for (std::size_t f = 0; f < frames; ++f) {
    const double* m = obs.mask.values().data() + f * np;
    const double* v = obs.values.values().data() + f * np;
    std::size_t count = 0;
    for (std::size_t k = 0; k < np; ++k) count += m[k] != 0.0 ? 1 : 0;
    if (count == 0) throw ConfigError("make_lf_interp: empty observation set in frame " + std::to_string(f));
    auto filled = nearest_fill(m, v, p, periodic);
    if (method == InterpMethod::bicubic) {
      const double s = std::sqrt(static_cast<double>(np) / static_cast<double>(count));
      filled = cubic_smooth(filled, p, s, periodic);
    }
    std::copy(filled.begin(), filled.end(), out.values().begin() + static_cast<std::ptrdiff_t>(f * np));
  }
  return out;
}

}  // namespace picsb
