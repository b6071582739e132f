#include "picsb/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "picsb/errors.hpp"

namespace picsb {

namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

// Plans are created once per size under a lock; fftw_execute_dft on
// caller-owned buffers is thread-safe.
const PlanPair& plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto* a = fftw_alloc_complex(n * n);
  auto* b = fftw_alloc_complex(n * n);
  PlanPair p;
  const int ni = static_cast<int>(n);
  p.fwd = fftw_plan_dft_2d(ni, ni, a, b, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inv = fftw_plan_dft_2d(ni, ni, a, b, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(a);
  fftw_free(b);
  return cache.emplace(n, p).first->second;
}

}  // namespace

Spectral2D::Spectral2D(std::size_t n, double length) : n_(n), length_(length) {
  if (n < 2) throw ConfigError("spectral grid needs n >= 2");
}

std::vector<Spectral2D::Complex> Spectral2D::forward(std::span<const double> f) const {
  if (f.size() != n_ * n_) throw ConfigError("spectral forward: size mismatch");
  std::vector<Complex> in(f.begin(), f.end());
  std::vector<Complex> out(n_ * n_);
  fftw_execute_dft(plans_for(n_).fwd, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> Spectral2D::inverse(std::span<const Complex> spec) const {
  std::vector<Complex> in(spec.begin(), spec.end());
  std::vector<Complex> out(n_ * n_);
  fftw_execute_dft(plans_for(n_).inv, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double norm = 1.0 / static_cast<double>(n_ * n_);
  std::vector<double> r(n_ * n_);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = out[i].real() * norm;
  return r;
}

double Spectral2D::wavenumber(std::size_t m) const {
  const double k0 = 2.0 * std::numbers::pi / length_;
  const auto mi = static_cast<std::ptrdiff_t>(m);
  const auto ni = static_cast<std::ptrdiff_t>(n_);
  return k0 * static_cast<double>(mi <= ni / 2 - (ni % 2 == 0 ? 1 : 0) ? mi : mi - ni);
}

double Spectral2D::wavenumber_odd(std::size_t m) const {
  if (n_ % 2 == 0 && m == n_ / 2) return 0.0;
  return wavenumber(m);
}

std::vector<double> Spectral2D::d_dxi1(std::span<const double> f) const {
  auto s = forward(f);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) s[i * n_ + j] *= Complex(0.0, wavenumber_odd(j));
  return inverse(s);
}

std::vector<double> Spectral2D::d_dxi2(std::span<const double> f) const {
  auto s = forward(f);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) s[i * n_ + j] *= Complex(0.0, wavenumber_odd(i));
  return inverse(s);
}

std::vector<double> Spectral2D::laplacian(std::span<const double> f) const {
  auto s = forward(f);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      const double k1 = wavenumber(j), k2 = wavenumber(i);
      s[i * n_ + j] *= -(k1 * k1 + k2 * k2);
    }
  return inverse(s);
}

std::vector<double> Spectral2D::inverse_laplacian(std::span<const double> f) const {
  auto s = forward(f);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      const double k1 = wavenumber(j), k2 = wavenumber(i);
      const double k2sum = k1 * k1 + k2 * k2;
      s[i * n_ + j] = k2sum == 0.0 ? Complex(0.0, 0.0) : s[i * n_ + j] / (-k2sum);
    }
  return inverse(s);
}

bool Spectral2D::keep_dealiased(std::size_t row, std::size_t col) const {
  const double kmax = static_cast<double>(n_) / 3.0;
  const double k0 = 2.0 * std::numbers::pi / length_;
  return std::abs(wavenumber(row) / k0) < kmax && std::abs(wavenumber(col) / k0) < kmax;
}

}  // namespace picsb
