#pragma once

#include <cstddef>
#include <vector>

#include "picsb/field.hpp"
#include "picsb/rng.hpp"

namespace picsb {

struct ObservationSet;

/// Viscous Burgers on the periodic unit interval, saved on an nx x nt
/// space-time grid with t_j = j * t_end / (nt - 1).
struct BurgersSpec {
  std::size_t nx = 32;
  std::size_t nt = 32;
  double nu_hf = 0.01;
  double nu_lf = 0.1;
  double t_end = 1.0;
  /// Internal spatial refinement; u0 is expected on nx * fine_factor points.
  std::size_t fine_factor = 4;
  double cfl = 0.3;
  /// Internal steps per output interval; 0 picks them from the CFL limit.
  std::size_t substeps = 0;

  double h() const { return 1.0 / static_cast<double>(nx); }
  double dt() const { return t_end / static_cast<double>(nt - 1); }
  void validate() const;
};

/// Steady Darcy flow -div(a grad u) = f on the unit square, u = 0 on the
/// boundary, nodes at xi = i / (n - 1).
struct DarcySpec {
  std::size_t n = 32;
  double forcing = 1.0;
  double a_low = 3.0;
  double a_high = 12.0;
  /// Correlation length of the Gaussian field thresholded into a(xi).
  double length_scale = 0.08;
  double tol = 1e-10;
  std::size_t max_iter = 50000;

  double h() const { return 1.0 / static_cast<double>(n - 1); }
  void validate() const;
};

/// Forced 2D Navier-Stokes in vorticity form on the (0, 2 pi)^2 torus.
struct KolmogorovSpec {
  std::size_t n = 64;
  std::size_t frames = 8;
  double re = 1000.0;
  double t_end = 1.25;
  double forcing_amplitude = 4.0;
  double forcing_wavenumber = 4.0;
  double drag = 0.1;
  bool forcing_enabled = true;
  double cfl = 0.4;
  double max_dt = 0.01;
  /// When positive, every step uses this dt and a CFL violation is an error.
  double fixed_dt = 0.0;
  /// Standard deviation of the random initial vorticity.
  double ic_std = 4.0;

  double frame_spacing() const { return t_end / static_cast<double>(frames); }
  double h() const;
  void validate() const;
};

// ---- Burgers ------------------------------------------------------------
/// Zero-mean periodic random field with k^-2 amplitude decay, unit std.
Field sample_burgers_ic(RngStream& rng, std::size_t nx);
/// HF trajectory (nu_hf) restricted to the nx x nt output grid.
Field simulate_burgers(const Field& u0, const BurgersSpec& spec);
Field simulate_burgers_with_viscosity(const Field& u0, const BurgersSpec& spec, double nu);
/// Same initial condition, viscosity nu_lf.
Field make_lf_burgers(const Field& u0, const BurgersSpec& spec);

// ---- Darcy --------------------------------------------------------------
Field sample_darcy_permeability(RngStream& rng, const DarcySpec& spec);
Field solve_darcy(const Field& a, const DarcySpec& spec);
/// Harmonic-mean 5-point operator -div(a grad u) at interior nodes; boundary
/// entries of the result are 0. Shared by the solver and the residual.
std::vector<double> darcy_apply(std::span<const double> u, const Field& a, double h);
/// Adjoint of darcy_apply restricted to interior nodes.
std::vector<double> darcy_apply_adjoint(std::span<const double> g, const Field& a, double h);

// ---- Kolmogorov ---------------------------------------------------------
Field sample_kolmogorov_ic(RngStream& rng, const KolmogorovSpec& spec);
/// Returns [frames, n, n] snapshots at gamma_j = (j + 1) * t_end / frames.
Field simulate_kolmogorov(const Field& omega0, const KolmogorovSpec& spec);
/// Forcing f(xi, gamma) excluding the drag term: -A cos(k xi_2), per node.
std::vector<double> kolmogorov_static_forcing(const KolmogorovSpec& spec);

// ---- LF by interpolation ---------------------------------------------------
enum class InterpMethod { nearest, bicubic };

/// Full-grid estimate from sparse observations, per frame. Accepts [n, m]
/// (one frame) or [frames, n, m] layouts. `periodic` selects wrap-around
/// distances and kernel taps.
Field make_lf_interp(const ObservationSet& obs, InterpMethod method, bool periodic);

}  // namespace picsb
