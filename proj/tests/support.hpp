#pragma once

#include "sck/system_model.hpp"

#include <cmath>
#include <random>

namespace sck::testing {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Random matrix with entries uniform in [-1, 1].
inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = u(rng);
  return M;
}

/// Random matrix whose symmetric part is negative definite: a skew part plus
/// -(G G^T + margin I).
inline Matrix random_dissipative(std::mt19937_64& rng, int n, double margin = 0.1) {
  const Matrix S = random_matrix(rng, n, n);
  const Matrix G = random_matrix(rng, n, n);
  return (S - S.transpose()) * 0.5 - G * G.transpose() * 0.5 - margin * Matrix::Identity(n, n);
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
inline Matrix random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Matrix M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  Eigen::HouseholderQR<Matrix> qr(M);
  return qr.householderQ() * Matrix::Identity(n, n);
}

/// Orthogonal projector onto the column span of M (SVD, relative threshold).
inline Matrix span_projector(const Matrix& M, double tol = 1e-9) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() == 0) return Matrix::Zero(n, n);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  int r = 0;
  const double top = s.size() ? s(0) : 0.0;
  while (r < s.size() && s(r) > tol * std::max(1.0, top)) ++r;
  const Matrix U = svd.matrixU().leftCols(r);
  return U * U.transpose();
}

/// Angle-free distance between unit-normalized vectors, insensitive to sign.
inline double direction_distance(Vector a, Vector b) {
  a.normalize();
  b.normalize();
  return std::min((a - b).norm(), (a + b).norm());
}

}  // namespace sck::testing
