#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sck {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical thresholds shared by the algebraic tests.
struct ToleranceConfig {
  double psd_tol = 1e-10;   ///< slack for semidefiniteness decisions
  double rank_tol = 1e-9;   ///< singular-value rank threshold
  double zero_tol = 1e-9;   ///< vector-nullity threshold
  double eps_a = 1e-6;      ///< offset above 1/2 used by the Lambda test

  /// Throws DomainError if any field is out of range.
  void validate() const;
};

/// Finite-dimensional linear stochastic system
///   dX = (A X + B u) dt + (C1 + C2) X dW
/// with a scalar Brownian motion W.
///
/// C1 is the possibly stiff part of the noise operator and C2 the bounded
/// part. At finite dimension both are plain matrices; the split only matters
/// for the joint dissipativity set, which involves C1 alone. The full noise
/// operator is never stored and is always recomputed by C().
class StochasticSystem {
 public:
  StochasticSystem(Matrix A, Matrix B, Matrix C1, Matrix C2, double gamma = 0.0);

  /// Single noise operator treated as the stiff part (C1 = C, C2 = 0).
  static StochasticSystem with_noise(Matrix A, Matrix B, Matrix C);
  /// Single noise operator treated as bounded (C1 = 0, C2 = C).
  static StochasticSystem with_bounded_noise(Matrix A, Matrix B, Matrix C);

  int n() const { return static_cast<int>(A_.rows()); }
  int m() const { return static_cast<int>(B_.cols()); }
  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C1() const { return C1_; }
  const Matrix& C2() const { return C2_; }
  Matrix C() const { return C1_ + C2_; }
  /// Singularity exponent of the stiff noise part; metadata only.
  double gamma() const { return gamma_; }

 private:
  Matrix A_, B_, C1_, C2_;
  double gamma_;
};

/// Orthonormal basis of a linear subspace of R^n. dim() == 0 encodes {0}.
class SubspaceBasis {
 public:
  explicit SubspaceBasis(int ambient_dim) : basis_(ambient_dim, 0) {}
  /// Columns of `basis` must be orthonormal within 1e-10.
  explicit SubspaceBasis(Matrix basis);

  int dim() const { return static_cast<int>(basis_.cols()); }
  int ambient_dim() const { return static_cast<int>(basis_.rows()); }
  const Matrix& basis() const { return basis_; }

  /// Euclidean distance from x to the subspace.
  double distance(const Vector& x) const;

 private:
  Matrix basis_;
};

struct LambdaPoint {
  double lambda;
  bool in_set;
  double margin;    ///< top eigenvalue of sym(A + lambda C1) + a C1^T C1
  bool boundary;    ///< |margin| <= psd_tol
};

struct YosidaPair {
  Matrix J;    ///< resolvent n (n I - A)^{-1}
  Matrix An;   ///< J A
};

/// Symmetric part (M + M^T) / 2.
Matrix symmetric_part(const Matrix& M);

/// Largest eigenvalue of the symmetric part of M.
double dissipativity_margin(const Matrix& M);

/// True iff <M x, x> <= tol |x|^2 for every x.
bool is_dissipative(const Matrix& M, double tol);

/// Joint dissipativity set evaluated on a grid, with a = 1/2 + eps_a.
std::vector<LambdaPoint> lambda_set(const StochasticSystem& sys,
                                    const std::vector<double>& lambda_grid,
                                    const ToleranceConfig& cfg = {});

/// Yosida resolvent and approximant of A at resolvent parameter nres.
YosidaPair yosida(const Matrix& A, double nres);

/// e^{tA}. Throws DomainError for t < 0.
Matrix semigroup(const Matrix& A, double t);

/// e^{tA} x. t = 0 returns x unchanged.
Vector semigroup_apply(const Matrix& A, double t, const Vector& x);

/// Spectral norm.
double norm2(const Matrix& M);

/// Throws DomainError if any entry is NaN or infinite.
void require_finite(const Matrix& M, const char* what);

}  // namespace sck
