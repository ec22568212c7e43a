#include "sck/system_model.hpp"

#include "sck/errors.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

namespace sck {

void ToleranceConfig::validate() const {
  if (!(psd_tol >= 0.0) || !std::isfinite(psd_tol)) throw DomainError("psd_tol must be >= 0");
  if (!(rank_tol > 0.0) || !std::isfinite(rank_tol)) throw DomainError("rank_tol must be > 0");
  if (!(zero_tol > 0.0) || !std::isfinite(zero_tol)) throw DomainError("zero_tol must be > 0");
  if (!(eps_a > 0.0) || !std::isfinite(eps_a)) throw DomainError("eps_a must be > 0");
}

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
}

StochasticSystem::StochasticSystem(Matrix A, Matrix B, Matrix C1, Matrix C2, double gamma)
    : A_(std::move(A)), B_(std::move(B)), C1_(std::move(C1)), C2_(std::move(C2)), gamma_(gamma) {
  const auto n = A_.rows();
  if (n < 1 || A_.cols() != n) throw DimensionError("A must be square with n >= 1");
  if (B_.rows() != n || B_.cols() < 1) throw DimensionError("B must be n x m with m >= 1");
  if (C1_.rows() != n || C1_.cols() != n) throw DimensionError("C1 must be n x n");
  if (C2_.rows() != n || C2_.cols() != n) throw DimensionError("C2 must be n x n");
  require_finite(A_, "A");
  require_finite(B_, "B");
  require_finite(C1_, "C1");
  require_finite(C2_, "C2");
  if (!(gamma_ >= 0.0 && gamma_ < 0.5)) throw DomainError("gamma must lie in [0, 1/2)");
}

StochasticSystem StochasticSystem::with_noise(Matrix A, Matrix B, Matrix C) {
  const auto n = A.rows();
  return {std::move(A), std::move(B), std::move(C), Matrix::Zero(n, n)};
}

StochasticSystem StochasticSystem::with_bounded_noise(Matrix A, Matrix B, Matrix C) {
  const auto n = A.rows();
  return {std::move(A), std::move(B), Matrix::Zero(n, n), std::move(C)};
}

SubspaceBasis::SubspaceBasis(Matrix basis) : basis_(std::move(basis)) {
  const Matrix gram = basis_.transpose() * basis_;
  const Matrix eye = Matrix::Identity(basis_.cols(), basis_.cols());
  if (basis_.cols() > 0 && (gram - eye).cwiseAbs().maxCoeff() > 1e-10)
    throw DomainError("subspace basis columns are not orthonormal");
}

double SubspaceBasis::distance(const Vector& x) const {
  if (x.size() != basis_.rows()) throw DimensionError("vector does not match ambient dimension");
  if (dim() == 0) return x.norm();
  return (x - basis_ * (basis_.transpose() * x)).norm();
}

Matrix symmetric_part(const Matrix& M) { return 0.5 * (M + M.transpose()); }

double dissipativity_margin(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("dissipativity test needs a square matrix");
  require_finite(M, "matrix");
  if (M.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric_part(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

bool is_dissipative(const Matrix& M, double tol) { return dissipativity_margin(M) <= tol; }

std::vector<LambdaPoint> lambda_set(const StochasticSystem& sys, const std::vector<double>& lambda_grid,
                                    const ToleranceConfig& cfg) {
  cfg.validate();
  if (lambda_grid.empty()) throw DomainError("lambda grid is empty");
  const double a = 0.5 + cfg.eps_a;
  const Matrix gram = sys.C1().transpose() * sys.C1();
  std::vector<LambdaPoint> out;
  out.reserve(lambda_grid.size());
  for (double lambda : lambda_grid) {
    if (!std::isfinite(lambda)) throw DomainError("lambda grid has a non-finite entry");
    const Matrix M = sys.A() + lambda * sys.C1() + a * gram;
    const double margin = dissipativity_margin(M);
    out.push_back({lambda, margin <= cfg.psd_tol, margin, std::abs(margin) <= cfg.psd_tol});
  }
  return out;
}

YosidaPair yosida(const Matrix& A, double nres) {
  if (A.rows() != A.cols()) throw DimensionError("Yosida approximation needs a square matrix");
  if (!(nres > 0.0)) throw DomainError("resolvent parameter must be positive");
  const auto n = A.rows();
  // n (nI - A)^{-1} = (I - A/n)^{-1}; the second form is exact for A = 0.
  const Matrix shifted = Matrix::Identity(n, n) - A / nres;
  Eigen::FullPivLU<Matrix> lu(shifted);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw SingularityError("resolvent (nI - A) is singular; A is not dissipative or n is too small");
  YosidaPair out;
  out.J = lu.inverse();
  out.An = out.J * A;
  return out;
}

Matrix semigroup(const Matrix& A, double t) {
  if (A.rows() != A.cols()) throw DimensionError("semigroup needs a square generator");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("semigroup time must be finite and >= 0");
  if (t == 0.0) return Matrix::Identity(A.rows(), A.cols());
  const Matrix tA = t * A;
  return tA.exp();
}

Vector semigroup_apply(const Matrix& A, double t, const Vector& x) {
  if (x.size() != A.rows()) throw DimensionError("state vector does not match generator");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("semigroup time must be finite and >= 0");
  if (t == 0.0) return x;
  return semigroup(A, t) * x;
}

double norm2(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

}  // namespace sck
