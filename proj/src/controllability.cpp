#include "sck/controllability.hpp"

#include "sck/errors.hpp"
#include "sck/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace sck {

std::string_view to_string(Condition c) { return c == Condition::N1 ? "N1" : "N2"; }

std::string_view to_string(VerdictTag v) {
  switch (v) {
    case VerdictTag::ApproxControllable:
      return "ApproxControllable";
    case VerdictTag::NotApproxControllable:
      return "NotApproxControllable";
    case VerdictTag::NecessaryConditionsOnlyPassed:
      return "NecessaryConditionsOnlyPassed";
  }
  return "?";
}

int HautusReport::violation_count() const {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [](const HautusPoint& p) {
    return p.violated && p.alpha_imag == 0.0;
  }));
}

int HautusReport::complex_violation_count() const {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [](const HautusPoint& p) {
    return p.violated && p.alpha_imag != 0.0;
  }));
}

double HautusReport::min_sigma() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points)
    if (p.source == HautusPoint::Source::Eigenvalue && p.alpha_imag == 0.0) best = std::min(best, p.sigma_min);
  return best;
}

namespace {

// Real matrix whose singular values are those of [op - sI; Bt], each
// repeated twice when s is complex.
Matrix realified_stack(const Matrix& op, const Matrix& Bt, std::complex<double> s) {
  const auto n = op.rows();
  const auto m = Bt.rows();
  Matrix top = op - s.real() * Matrix::Identity(n, n);
  if (s.imag() == 0.0) {
    Matrix out(n + m, n);
    out << top, Bt;
    return out;
  }
  // M = Mr + i Mi with Mr = [top; Bt], Mi = [-Im(s) I; 0].
  Matrix Mr(n + m, n);
  Mr << top, Bt;
  Matrix Mi = Matrix::Zero(n + m, n);
  Mi.topRows(n) = -s.imag() * Matrix::Identity(n, n);
  Matrix out(2 * (n + m), 2 * n);
  out << Mr, -Mi, Mi, Mr;
  return out;
}

// Orthonormal basis of range(M), singular values below rel_tol * sigma_max dropped.
Matrix orth(const Matrix& M, double rel_tol) {
  if (M.cols() == 0) return Matrix(M.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Matrix(M.rows(), 0);
  int rank = 0;
  while (rank < s.size() && s(rank) > rel_tol * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

// Orthonormal basis of the null space of M (columns), singular values <= tau
// counted as zero.
Matrix null_space(const Matrix& M, double tau) {
  const auto k = M.cols();
  if (k == 0) return Matrix(0, 0);
  if (M.rows() == 0) return Matrix::Identity(k, k);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int rank = 0;
  while (rank < s.size() && s(rank) > tau) ++rank;
  return svd.matrixV().rightCols(k - rank);
}

void normalize_sign(Vector& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v(idx) < 0.0) v = -v;
}

struct Task {
  double lambda;
  std::complex<double> s;
  HautusPoint::Source source;
};

// Eigenvalues of op with negative real part, conjugate pairs reduced to the
// member with positive imaginary part, near-duplicates merged.
std::vector<std::complex<double>> negative_spectrum(const Matrix& op, double zero_tol) {
  Eigen::EigenSolver<Matrix> es(op, false);
  if (es.info() != Eigen::Success) throw SingularityError("eigenvalue computation failed");
  std::vector<std::complex<double>> raw;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    std::complex<double> z = es.eigenvalues()(i);
    const double scale = std::max(1.0, std::abs(z));
    if (std::abs(z.imag()) <= zero_tol * scale) z = {z.real(), 0.0};
    if (z.imag() < 0.0) continue;
    if (z.real() < 0.0) raw.push_back(z);
  }
  std::sort(raw.begin(), raw.end(), [](auto a, auto b) {
    return std::make_pair(a.real(), a.imag()) < std::make_pair(b.real(), b.imag());
  });
  std::vector<std::complex<double>> out;
  for (const auto& z : raw) {
    if (!out.empty()) {
      const double scale = std::max(1.0, std::abs(z));
      if (std::abs(z - out.back()) <= zero_tol * scale) continue;
    }
    out.push_back(z);
  }
  return out;
}

}  // namespace

double stacked_sigma_min(const Matrix& op, const Matrix& Bt, std::complex<double> s) {
  if (op.rows() != op.cols() || Bt.cols() != op.cols()) throw DimensionError("stacked pencil shape mismatch");
  const Matrix M = realified_stack(op, Bt, s);
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1);
}

KalmanHautusResult kalman_hautus_rank(const Matrix& A, const Matrix& B,
                                      std::vector<std::complex<double>> s_samples,
                                      const ToleranceConfig& cfg) {
  cfg.validate();
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw DimensionError("A must be n x n and B n x m");
  const Matrix At = A.transpose();
  Eigen::EigenSolver<Matrix> es(At, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) s_samples.push_back(es.eigenvalues()(i));
  const Matrix Bt = B.transpose();
  const double threshold = cfg.rank_tol * (1.0 + norm2(A));
  double min_sigma = std::numeric_limits<double>::infinity();
  for (const auto& s : s_samples) {
    // [conj(s) I - A^T; B^T] has the same singular values as [A^T - conj(s) I; -B^T].
    min_sigma = std::min(min_sigma, stacked_sigma_min(At, Bt, std::conj(s)));
  }
  return {min_sigma > threshold, min_sigma};
}

HautusReport check_condition(const StochasticSystem& sys, const std::vector<double>& lambdas,
                             Condition condition, const ToleranceConfig& cfg, const HautusOptions& options) {
  cfg.validate();
  const Matrix C = sys.C();
  const Matrix Bt = sys.B().transpose();

  std::vector<double> lambda_values;
  if (condition == Condition::N1) {
    lambda_values = {0.0};
  } else {
    lambda_values = lambdas;
    std::vector<double> needed = lambdas;
    for (const auto& [l, a] : options.explicit_points) needed.push_back(l);
    if (!needed.empty()) {
      for (const auto& p : lambda_set(sys, needed, cfg))
        if (!p.in_set)
          throw DomainError("lambda = " + std::to_string(p.lambda) +
                            " is outside the joint dissipativity set (margin " + std::to_string(p.margin) + ")");
    }
  }
  auto op_for = [&](double lambda) -> Matrix {
    if (condition == Condition::N1) return sys.A().transpose();
    return (sys.A() + lambda * C).transpose();
  };

  std::vector<Task> tasks;
  for (double lambda : lambda_values) {
    for (const auto& z : negative_spectrum(op_for(lambda), cfg.zero_tol))
      tasks.push_back({lambda, z, HautusPoint::Source::Eigenvalue});
    for (double alpha : options.alpha_grid) tasks.push_back({lambda, {alpha, 0.0}, HautusPoint::Source::Grid});
  }
  for (const auto& [l, a] : options.explicit_points)
    tasks.push_back({condition == Condition::N1 ? 0.0 : l, {a, 0.0}, HautusPoint::Source::Explicit});

  HautusReport report;
  report.condition = condition;
  report.points.resize(tasks.size());
  parallel_for(static_cast<std::int64_t>(tasks.size()), omp_get_max_threads(), [&](std::int64_t i) {
    const auto& t = tasks[static_cast<std::size_t>(i)];
    HautusPoint p;
    p.lambda = t.lambda;
    p.alpha = t.s.real();
    p.alpha_imag = t.s.imag();
    p.source = t.source;
    p.sigma_min = stacked_sigma_min(op_for(t.lambda), Bt, t.s);
    p.violated = p.sigma_min <= cfg.rank_tol;
    report.points[static_cast<std::size_t>(i)] = p;
  });
  std::stable_sort(report.points.begin(), report.points.end(), [](const HautusPoint& a, const HautusPoint& b) {
    return std::tie(a.lambda, a.alpha, a.alpha_imag, a.source) < std::tie(b.lambda, b.alpha, b.alpha_imag, b.source);
  });

  const HautusPoint* worst = nullptr;
  for (const auto& p : report.points)
    if (p.violated && p.alpha_imag == 0.0 && (!worst || p.sigma_min < worst->sigma_min)) worst = &p;
  if (worst) {
    const Matrix M = realified_stack(op_for(worst->lambda), Bt, {worst->alpha, 0.0});
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
    Vector w = svd.matrixV().col(M.cols() - 1);
    w.normalize();
    normalize_sign(w);
    report.witness = w;
    report.witness_point = std::make_pair(worst->lambda, worst->alpha);
  }
  return report;
}

SubspaceBasis strict_invariant_subspace(const Matrix& A, const Matrix& C, const Matrix& B,
                                        const ToleranceConfig& cfg) {
  cfg.validate();
  const auto n = A.rows();
  if (A.cols() != n || C.rows() != n || C.cols() != n || B.rows() != n)
    throw DimensionError("A, C must be n x n and B n x m");
  const Matrix At = A.transpose();
  const Matrix Ct = C.transpose();

  // V0 = Ker B^T.
  Matrix V;
  {
    const Matrix Bt = B.transpose();
    const double smax = Bt.size() ? norm2(Bt) : 0.0;
    V = smax == 0.0 ? Matrix(Matrix::Identity(n, n)) : null_space(Bt, cfg.rank_tol * smax);
  }
  const double tau = cfg.rank_tol * std::max(1.0, norm2(A));

  for (Eigen::Index iter = 0; iter <= n && V.cols() > 0; ++iter) {
    Matrix stacked(n, 2 * V.cols());
    stacked << V, Ct * V;
    const Matrix W = orth(stacked, cfg.rank_tol);
    const Matrix AV = At * V;
    const Matrix residual = AV - W * (W.transpose() * AV);
    const Matrix keep = null_space(residual, tau);
    if (keep.cols() == V.cols()) break;
    V = V * keep;
  }
  if (V.cols() > 0) {
    // Re-orthonormalize to remove drift accumulated by repeated products.
    Eigen::HouseholderQR<Matrix> qr(V);
    Matrix Q = qr.householderQ() * Matrix::Identity(n, V.cols());
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
      Vector col = Q.col(j);
      normalize_sign(col);
      Q.col(j) = col;
    }
    return SubspaceBasis(Q);
  }
  return SubspaceBasis(static_cast<int>(n));
}

std::optional<bool> commuting_case_check(const StochasticSystem& sys, const ToleranceConfig& cfg) {
  cfg.validate();
  if (sys.m() != sys.n()) return std::nullopt;
  const Matrix At = sys.A().transpose();
  const Matrix Bt = sys.B().transpose();
  const Matrix Ct = sys.C().transpose();
  const double nA = norm2(sys.A()), nB = norm2(sys.B()), nC = norm2(sys.C());
  const double commAB = norm2(Bt * At - At * Bt);
  const double commCB = norm2(Bt * Ct - Ct * Bt);
  if (commAB > cfg.zero_tol * nA * nB || commCB > cfg.zero_tol * nB * nC) return std::nullopt;
  const Matrix rangeB = orth(sys.B(), cfg.rank_tol);
  return rangeB.cols() == sys.n();
}

ControllabilityVerdict verdict(const StochasticSystem& sys, const std::vector<double>& lambdas,
                               const ToleranceConfig& cfg, const VerdictOptions& options) {
  cfg.validate();
  ControllabilityVerdict out;
  out.subspace = strict_invariant_subspace(sys.A(), sys.C(), sys.B(), cfg);
  out.invariant_subspace_dim = out.subspace.dim();

  std::vector<double> admissible;
  if (!lambdas.empty()) {
    for (const auto& p : lambda_set(sys, lambdas, cfg)) {
      if (p.in_set)
        admissible.push_back(p.lambda);
      else
        out.skipped_lambdas.push_back(p.lambda);
    }
  }
  out.n1 = check_condition(sys, {}, Condition::N1, cfg);
  out.n2 = check_condition(sys, admissible, Condition::N2, cfg);
  out.n1_passed = out.n1.passed();
  out.n2_passed = out.n2.passed();
  out.commuting_case = commuting_case_check(sys, cfg);

  const bool necessary_ok = out.n1_passed && out.n2_passed;
  const bool trivial = out.invariant_subspace_dim == 0;
  out.consistency_warning = trivial != necessary_ok;
  if (options.subspace_decisive) {
    out.verdict = trivial ? VerdictTag::ApproxControllable : VerdictTag::NotApproxControllable;
  } else {
    out.verdict = necessary_ok ? VerdictTag::NecessaryConditionsOnlyPassed : VerdictTag::NotApproxControllable;
  }
  return out;
}

}  // namespace sck
