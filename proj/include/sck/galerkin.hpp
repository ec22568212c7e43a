#pragma once

#include "sck/system_model.hpp"

#include <vector>

namespace sck {

/// Scalar coefficient function on (0, 1) chosen from a fixed family of
/// built-ins. There is no expression parsing here.
class CoefficientFn {
 public:
  enum class Kind { Constant, Polynomial, Trigonometric };

  /// f(x) = value
  static CoefficientFn constant(double value);
  /// f(x) = sum_i coeffs[i] x^i
  static CoefficientFn polynomial(std::vector<double> coeffs);
  /// f(x) = sum_{k>=0} cos_coeffs[k] cos(k pi x) + sum_{k>=1} sin_coeffs[k-1] sin(k pi x)
  static CoefficientFn trigonometric(std::vector<double> cos_coeffs, std::vector<double> sin_coeffs);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  const std::vector<double>& sin_coeffs() const { return sin_coeffs_; }

 private:
  CoefficientFn(Kind kind, std::vector<double> a, std::vector<double> b)
      : kind_(kind), coeffs_(std::move(a)), sin_coeffs_(std::move(b)) {}

  Kind kind_;
  std::vector<double> coeffs_;
  std::vector<double> sin_coeffs_;
};

/// 1-D divergence-form heat equation with first-order multiplicative noise
///   dX = (a X')' dt + u b dt + c X' dW   on (0, 1), X = 0 on the boundary.
struct HeatSystemSpec {
  int N = 8;                                      ///< truncation dimension
  CoefficientFn a = CoefficientFn::constant(1.0);  ///< diffusion
  CoefficientFn c = CoefficientFn::constant(0.0);  ///< noise drift
  CoefficientFn b = CoefficientFn::constant(1.0);  ///< control shape
  /// Number of composite panels (10-point Gauss-Legendre each); must be >= 2N.
  int quad_order = 16;
};

/// Orthonormal Dirichlet sine mode e_k(x) = sqrt(2) sin(k pi x), k >= 1.
double sine_mode(int k, double x);

/// Truncation of the heat equation with the rank-one projection noise
/// C = e_1 e_1^T in the sine eigenbasis (bounded noise, C1 = 0).
StochasticSystem assemble_example2(int N, const Vector& b_coeffs);

/// Weak-form Galerkin matrices of the divergence-form operator, the noise
/// operator c d/dx and the control shape in the first N sine modes.
/// The noise is treated as the stiff part (C1 = C, C2 = 0).
StochasticSystem assemble_divform_1d(const HeatSystemSpec& spec);

/// Coordinates <f, e_k>, k = 1..N, by composite Gauss-Legendre quadrature.
Vector project_onto_sine_basis(const CoefficientFn& f, int N, int quad_order);

struct EllipticityResult {
  bool ok;
  double min_margin;  ///< min over the grid of a(x) - alpha c(x)^2
};

/// Pointwise ellipticity a - alpha c^2 >= 0 on a uniform interior grid.
EllipticityResult check_ellipticity(const CoefficientFn& a, const CoefficientFn& c, double alpha,
                                    int grid_points = 1000, double psd_tol = 1e-10);

struct ModeCoefficient {
  int mode;           ///< 1-based, ordered by decreasing eigenvalue
  int column;         ///< 0-based column of B
  double eigenvalue;
  double coefficient;
  bool near_zero;
};

struct EigenCluster {
  int first_mode;
  int size;
  double eigenvalue;
  int projection_rank;  ///< rank of (eigenspace basis)^T B
  bool deficient;       ///< projection_rank < size
};

struct BCoefficientReport {
  std::vector<ModeCoefficient> coefficients;
  std::vector<EigenCluster> clusters;
  /// Modes whose every column coefficient is near zero.
  std::vector<int> flagged_modes;
};

/// Projects the columns of B onto an orthonormal eigenbasis of a symmetric A.
BCoefficientReport b_coefficient_test(const StochasticSystem& sys, const ToleranceConfig& cfg = {});

}  // namespace sck
