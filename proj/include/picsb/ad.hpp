#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace picsb::ad {

using Shape = std::vector<std::size_t>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::span<const double> value() const;
  std::size_t size() const;
  bool requires_grad() const;
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape over dense f64 tensors.
///
/// Every op appends a node holding its value. Nodes reachable from a
/// grad-requiring leaf also store a vector-Jacobian closure. Nodes with no
/// grad-requiring ancestor store nothing but their value, so a tape with only
/// constant leaves is a plain forward evaluator.
class Tape {
 public:
  using Backward = std::function<void(const std::vector<double>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Shape shape, std::vector<double> value);
  Var constant_scalar(double v) { return constant({1}, {v}); }
  Var leaf(Shape shape, std::vector<double> value);

  /// Appends a node. `backward` is kept only if any input requires grad.
  Var record(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs,
             Backward backward);
  Var record(Shape shape, std::vector<double> value, const std::vector<Var>& inputs,
             Backward backward);

  /// Seeds d(out)/d(out) = 1 for a single-element output and propagates.
  void backward(Var out);

  /// Gradient accumulated at `v` (zeros if nothing flowed there).
  std::vector<double> grad(Var v) const;

  /// Adds `g` into the gradient buffer of `v` (no-op for constants).
  void accumulate(Var v, std::span<const double> g);
  /// Mutable gradient buffer of `v`, allocated on first use. Returns an
  /// empty span for constants.
  std::span<double> grad_buffer(Var v);

  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  const std::vector<double>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

std::size_t shape_size(const Shape& s);

// ---- elementwise -------------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
/// alpha * a + beta
Var affine(Var a, double alpha, double beta);
/// a + c for a constant tensor c of the same size.
Var add_const(Var a, std::span<const double> c);
/// a * c for a constant tensor c of the same size.
Var mul_const(Var a, std::span<const double> c);
Var square(Var a);
Var silu(Var a);
Var tanh(Var a);
Var sin(Var a);
Var cos(Var a);

// ---- reductions ---------------------------------------------------------
Var sum(Var a);
Var mean(Var a);
Var sum_squares(Var a);
/// sqrt(sum(a^2) / count); throws NumericalError when the norm is zero and a
/// gradient is requested through it.
Var rms(Var a, std::size_t count);
Var sqrt_scalar(Var a);

// ---- shape --------------------------------------------------------------
Var reshape(Var a, Shape shape);
Var slice(Var a, std::size_t offset, Shape shape);
/// Concatenation along axis 0.
Var concat0(const std::vector<Var>& parts);

// ---- observation projection ---------------------------------------------
/// mask * y + (1 - mask) * x with constant mask and y.
Var project(Var x, std::span<const double> mask, std::span<const double> y);

// ---- neural-network layers ----------------------------------------------
enum class Padding { circular, reflect, zero };

/// x: [Cin, H, W], w: [Cout, Cin, k, k], b: [Cout]; "same" padding k/2,
/// output [Cout, ceil(H/stride), ceil(W/stride)].
Var conv2d(Var x, Var w, Var b, std::size_t stride, Padding padding);
/// Per-channel normalization over the spatial axes of x: [C, H, W].
Var instance_norm(Var x, double eps);
/// x: [C, H, W]; gamma, beta: [C].
Var channel_affine(Var x, Var gamma, Var beta);
/// Nearest-neighbour 2x upsampling of [C, H, W].
Var upsample2x(Var x);
/// y = W x + b for x: [in], W: [out, in], b: [out].
Var linear(Var x, Var w, Var b);
/// Y = X W^T (+ b) for X: [N, in], W: [out, in], b: [out] or invalid Var.
Var dense(Var x, Var w, Var b);

// ---- custom linear/nonlinear operators ------------------------------------
/// Wraps an operator given by its value map and vector-Jacobian product at x.
Var custom_unary(Var x, Shape out_shape, std::vector<double> out_value,
                 std::function<std::vector<double>(const std::vector<double>& grad_out)> vjp);

}  // namespace picsb::ad
