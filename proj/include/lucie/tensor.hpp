#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lucie/grid.hpp"

namespace lucie::ad {

/// Handle into a Tape; cheap to copy.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over a small closed operation set. Values are flat
/// float64 arrays with explicit shapes; no general broadcasting. The tape
/// is single-writer during forward recording and backward runs in strict
/// reverse order, accumulating gradients additively.
class Tape {
 public:
  /// When grads are disabled the tape records values only (pure inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Var leaf(std::vector<double> value, std::vector<int> shape, bool requires_grad);
  Var constant(std::vector<double> value, std::vector<int> shape);
  Var scalar(double value);

  const std::vector<double>& value(Var v) const { return nodes_[v.id].value; }
  const std::vector<int>& shape(Var v) const { return nodes_[v.id].shape; }
  const std::vector<double>& grad(Var v) const;

  // ---- primitives ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                 // elementwise
  Var scale(Var a, double c);
  Var silu(Var a);
  Var sum(Var a);                        // scalar
  Var dot_const(Var a, std::span<const double> c);  // scalar sum_i c_i a_i
  /// A [m,k] row-major times B [k,n] row-major -> [m,n].
  Var matmul(Var a, Var b);
  /// x [m,n] plus per-row bias b [m].
  Var bias_rows(Var x, Var b);

  /// Per-channel spherical-harmonic analysis: [C, nlat*nlon] -> [C, 2*ncoef].
  Var sht_forward(Var x, const SphtPlan& plan);
  /// Per-channel synthesis: [C, 2*ncoef] -> [C, nlat*nlon].
  Var sht_inverse(Var x, const SphtPlan& plan);
  /// Complex per-degree channel mixing: coeffs [Cin, 2*ncoef] with weights
  /// [(L+1)*Cout*Cin*2] (interleaved re/im) -> [Cout, 2*ncoef].
  Var spectral_mix(Var coeffs, Var weights, int cout, int cin, const SphtPlan& plan);

  /// Quadrature-weighted zonal log-amplitude spectrum used by the spectral
  /// regularizer: [C, nlat*nlon] -> [C, nlon/2+1] of log(A_k + eps) where
  /// A_k = sum_i wnorm_i |F_{i,k}| and F is the per-latitude zonal DFT.
  Var zonal_log_amplitude(Var x, const GridSpec& grid, double eps);

  /// Reverse sweep from a scalar loss node. Gradients are then readable
  /// via grad() for every requires_grad node reachable from the loss.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<int> shape;
    std::vector<double> grad;  // allocated during backward
    bool requires_grad = false;
    std::function<void()> backprop;  // empty for leaves/constants
  };

  Var make(std::vector<double> value, std::vector<int> shape, bool requires_grad,
           std::function<void()> backprop);
  void check_finite(const std::vector<double>& v) const;
  std::vector<double>& grad_buf(int id);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

}  // namespace lucie::ad
