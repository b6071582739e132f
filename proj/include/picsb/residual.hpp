#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "picsb/ad.hpp"
#include "picsb/config.hpp"
#include "picsb/field.hpp"
#include "picsb/observation.hpp"
#include "picsb/pde.hpp"

namespace picsb {

/// Residual values on the state grid plus the nodes where the stencil is
/// defined. Entries outside the valid mask are stored as 0.
struct ResidualField {
  Field values;
  Field valid;

  std::size_t valid_count() const;
  double max_abs() const;
};

/// RMS over valid nodes.
double residual_norm(const ResidualField& r);

/// Backward-Euler/central stencil on [space, time]; periodic in space, valid
/// for time index j >= 1.
ResidualField residual_burgers(const Field& x, double nu, double h, double dt);

/// Harmonic-mean 5-point stencil(u; a) - f at interior nodes.
ResidualField residual_darcy(const Field& u, const Field& a, double f, double h);

/// Inverse Laplacian on the 2 pi torus. Accepts [n, n] or [frames, n, n].
Field stream_function(const Field& omega);
/// v = (d psi / d xi_2, -d psi / d xi_1), per frame.
std::pair<Field, Field> velocity_from_vorticity(const Field& omega);

/// Vorticity residual on [frames, n, n], valid for frames j >= 1.
ResidualField residual_kolmogorov(const Field& omega, const KolmogorovSpec& spec);

/// A discretized residual map R_h with its vector-Jacobian product.
class ResidualOperator {
 public:
  virtual ~ResidualOperator() = default;
  virtual const Dims& dims() const = 0;
  virtual ResidualField evaluate(const Field& x) const = 0;
  /// g^T dR/dx at x; g is read only on valid nodes.
  virtual std::vector<double> vjp(const Field& x, std::span<const double> g) const = 0;
};

class BurgersResidual : public ResidualOperator {
 public:
  BurgersResidual(Dims dims, double nu, double h, double dt);
  const Dims& dims() const override { return dims_; }
  ResidualField evaluate(const Field& x) const override;
  std::vector<double> vjp(const Field& x, std::span<const double> g) const override;

 private:
  Dims dims_;
  double nu_, h_, dt_;
};

class DarcyResidual : public ResidualOperator {
 public:
  DarcyResidual(Field a, double f, double h);
  const Dims& dims() const override { return a_.dims(); }
  ResidualField evaluate(const Field& x) const override;
  std::vector<double> vjp(const Field& x, std::span<const double> g) const override;

 private:
  Field a_;
  double f_, h_;
};

class KolmogorovResidual : public ResidualOperator {
 public:
  explicit KolmogorovResidual(const KolmogorovSpec& spec);
  const Dims& dims() const override { return dims_; }
  /// Frames need not be zero-mean here (network outputs); the mean mode is
  /// dropped when forming the velocity.
  ResidualField evaluate(const Field& x) const override;
  std::vector<double> vjp(const Field& x, std::span<const double> g) const override;

 private:
  KolmogorovSpec spec_;
  Dims dims_;
};

/// HF residual operator for a benchmark; Darcy needs its permeability.
std::unique_ptr<ResidualOperator> make_residual_operator(const ExperimentConfig& cfg, const Field* coef = nullptr);

/// Differentiable RMS of op(x) over valid nodes. `x` may carry a leading
/// channel axis of size 1 or match op.dims() in size.
ad::Var residual_rms(ad::Var x, const ResidualOperator& op);

struct ResidualFloorEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  Field best;
  /// Best-so-far norm after every iteration (index 0 is the start).
  std::vector<double> history;
};

/// Projected gradient descent on mean-square residual, projecting onto the
/// observation set after every step.
ResidualFloorEstimate estimate_residual_floor(const ObservationSet& obs, const ResidualOperator& op,
                                              const Field& init, std::size_t iters, double step);

/// Stability bound delta'' / (1/dt + nu (pi/L)^2 + min_i (x_{i+1,j} - x_{i-1,j}) / 2h)
/// with the min over valid nodes of x_ref.
double burgers_error_bound(const Field& x_ref, double delta, double nu, double h, double dt, double length);

}  // namespace picsb
