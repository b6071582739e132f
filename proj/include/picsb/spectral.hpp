#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace picsb {

/// Spectral calculus on an n x n periodic grid of side `length`.
///
/// Layout is row-major [row, col]; the column index runs along xi_1 and the
/// row index along xi_2. Odd-derivative symbols drop the Nyquist mode so the
/// derivative matrices stay real and antisymmetric.
class Spectral2D {
 public:
  using Complex = std::complex<double>;

  explicit Spectral2D(std::size_t n, double length = 6.283185307179586476925286766559);

  std::size_t n() const { return n_; }
  double spacing() const { return length_ / static_cast<double>(n_); }

  std::vector<Complex> forward(std::span<const double> f) const;
  /// Inverse transform, returning the real part (normalized).
  std::vector<double> inverse(std::span<const Complex> spec) const;

  /// Angular wavenumber of index m along an axis (Nyquist kept as -n/2).
  double wavenumber(std::size_t m) const;
  /// Same, with the Nyquist mode zeroed (for odd derivatives).
  double wavenumber_odd(std::size_t m) const;

  std::vector<double> d_dxi1(std::span<const double> f) const;
  std::vector<double> d_dxi2(std::span<const double> f) const;
  std::vector<double> laplacian(std::span<const double> f) const;
  /// Inverse Laplacian with the zero mode set to 0 (any mean is discarded).
  std::vector<double> inverse_laplacian(std::span<const double> f) const;

  /// Spectral-space helpers used by the time stepper.
  bool keep_dealiased(std::size_t row, std::size_t col) const;

 private:
  std::size_t n_;
  double length_;
};

}  // namespace picsb
