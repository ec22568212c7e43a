#pragma once

// Brute-force oracle for the largest subspace V of Ker B^T with
// A^T V contained in V + C^T V, for small n. Candidates are enumerated
// independently of the library algorithm; since a sum of strictly invariant
// subspaces is again strictly invariant, every accepted candidate must lie
// inside the maximal one.

#include "support.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <vector>

namespace sck::testing {

/// Orthonormal basis of the column span of M.
inline Matrix orth(const Matrix& M, double tol = 1e-9) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() == 0) return Matrix(n, 0);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  int r = 0;
  while (r < s.size() && s(r) > tol * std::max(1.0, s(0))) ++r;
  return svd.matrixU().leftCols(r);
}

/// Residual of strict invariance and of membership in Ker B^T for span(V).
inline double strict_invariance_residual(const Matrix& A, const Matrix& C, const Matrix& B, const Matrix& V) {
  if (V.cols() == 0) return 0.0;
  Matrix S(V.rows(), 2 * V.cols());
  S << V, C.transpose() * V;
  const Matrix P = span_projector(S, 1e-9);
  const Matrix At_V = A.transpose() * V;
  const double inv = (At_V - P * At_V).norm();
  return inv + (B.transpose() * V).norm();
}

/// Real invariant "atoms" of M: real eigenvectors and realified complex pairs.
inline std::vector<Matrix> eigen_atoms(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M);
  std::vector<Matrix> atoms;
  const auto& ev = es.eigenvalues();
  const auto& vec = es.eigenvectors();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i).imag()) <= 1e-12) {
      atoms.push_back(vec.col(i).real());
    } else if (ev(i).imag() > 0) {
      Matrix pair(M.rows(), 2);
      pair << vec.col(i).real(), vec.col(i).imag();
      atoms.push_back(pair);
    }
  }
  return atoms;
}

struct OracleResult {
  int max_candidate_dim = 0;
  int accepted = 0;
  Matrix union_basis;  ///< orthonormal basis of the sum of accepted candidates
};

inline OracleResult brute_force_invariant(const Matrix& A, const Matrix& C, const Matrix& B,
                                          const std::vector<Matrix>& planted, std::uint64_t seed,
                                          double tol = 1e-8) {
  const int n = static_cast<int>(A.rows());
  std::vector<Matrix> candidates = planted;

  std::vector<Matrix> generators;
  for (double lambda : {0.0, -3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0})
    for (const auto& a : eigen_atoms(A.transpose() + lambda * C.transpose())) generators.push_back(a);
  for (const auto& a : eigen_atoms(C.transpose())) generators.push_back(a);

  // Subsets of up to three generators, with and without their C^T images.
  const auto g = generators.size();
  for (std::size_t i = 0; i < g; ++i) {
    candidates.push_back(generators[i]);
    for (std::size_t j = i + 1; j < g; ++j) {
      Matrix two(n, generators[i].cols() + generators[j].cols());
      two << generators[i], generators[j];
      candidates.push_back(two);
    }
  }
  const std::size_t base = candidates.size();
  for (std::size_t i = 0; i < base; ++i) {
    Matrix ext(n, 2 * candidates[i].cols());
    ext << candidates[i], C.transpose() * candidates[i];
    candidates.push_back(ext);
  }

  // Random subspaces of Ker B^T of every dimension.
  Eigen::JacobiSVD<Matrix> svd(B.transpose(), Eigen::ComputeFullV);
  int rank = 0;
  const auto& s = svd.singularValues();
  while (rank < s.size() && s(rank) > 1e-10 * std::max(1.0, s(0))) ++rank;
  const Matrix K = svd.matrixV().rightCols(n - rank);
  std::mt19937_64 rng(seed);
  for (int trial = 0; trial < 200 && K.cols() > 0; ++trial) {
    const int d = 1 + trial % static_cast<int>(K.cols());
    candidates.push_back(K * random_matrix(rng, static_cast<int>(K.cols()), d));
  }
  candidates.push_back(K);
  candidates.push_back(Matrix::Identity(n, n));

  OracleResult out;
  Matrix acc(n, 0);
  for (const auto& c : candidates) {
    const Matrix V = orth(c);
    if (V.cols() == 0) continue;
    if (strict_invariance_residual(A, C, B, V) > tol) continue;
    ++out.accepted;
    out.max_candidate_dim = std::max(out.max_candidate_dim, static_cast<int>(V.cols()));
    Matrix next(n, acc.cols() + V.cols());
    next << acc, V;
    acc = orth(next, 1e-7);
  }
  out.union_basis = acc;
  return out;
}

/// System with a planted strictly invariant subspace of dimension d inside
/// Ker B^T. Entries are multiples of 1/4.
struct PlantedSystem {
  Matrix A, B, C;
  Matrix V;  ///< planted basis (may be empty)
};

inline Matrix rational_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_int_distribution<int> u(-8, 8);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = u(rng) / 4.0;
  return M;
}

inline PlantedSystem planted_system(std::mt19937_64& rng, int n, int m, int d) {
  PlantedSystem s;
  s.C = rational_matrix(rng, n, n);
  if (d == 0) {
    s.A = rational_matrix(rng, n, n);
    s.B = rational_matrix(rng, n, m);
    s.V = Matrix(n, 0);
    return s;
  }
  // V spanned by the first d coordinate vectors after an integer shear, so
  // that all data stay rational.
  Matrix T = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) T(i, j) = std::uniform_int_distribution<int>(-1, 1)(rng);
  const Matrix V = T.leftCols(d);
  // B orthogonal to V.
  const Matrix Q = orth(V);
  const Matrix Pperp = Matrix::Identity(n, n) - Q * Q.transpose();
  s.B = Pperp * rational_matrix(rng, n, m);
  // A^T V = V a + C^T V c.
  const Matrix M = rational_matrix(rng, n, n);
  const Matrix target = V * rational_matrix(rng, d, d) + s.C.transpose() * V * rational_matrix(rng, d, d);
  const Matrix Vpinv = (V.transpose() * V).inverse() * V.transpose();
  const Matrix At = M + (target - M * V) * Vpinv;
  s.A = At.transpose();
  s.V = V;
  return s;
}

}  // namespace sck::testing
