#include "sck/galerkin.hpp"

#include "sck/errors.hpp"
#include "sck/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace sck {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();
constexpr int kPanelNodes = 10;

struct QuadratureRule {
  std::vector<double> x;
  std::vector<double> w;
};

// Composite Gauss-Legendre on (0, 1) with `panels` equal panels.
QuadratureRule composite_gauss(int panels) {
  using Rule = boost::math::quadrature::gauss<double, kPanelNodes>;
  const auto& absc = Rule::abscissa();
  const auto& wts = Rule::weights();
  QuadratureRule q;
  const double h = 1.0 / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    // boost stores the non-negative half of the symmetric rule.
    for (std::size_t i = 0; i < absc.size(); ++i) {
      const double off = 0.5 * h * absc[i];
      const double wi = 0.5 * h * wts[i];
      if (absc[i] == 0.0) {
        q.x.push_back(mid);
        q.w.push_back(wi);
      } else {
        q.x.push_back(mid - off);
        q.w.push_back(wi);
        q.x.push_back(mid + off);
        q.w.push_back(wi);
      }
    }
  }
  return q;
}

std::vector<double> sample(const CoefficientFn& f, const std::vector<double>& x, const char* name) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = f(x[i]);
    if (!std::isfinite(out[i]))
      throw EvaluationError(std::string("coefficient ") + name + " is not finite at x = " + std::to_string(x[i]));
  }
  return out;
}

}  // namespace

CoefficientFn CoefficientFn::constant(double value) { return {Kind::Constant, {value}, {}}; }

CoefficientFn CoefficientFn::polynomial(std::vector<double> coeffs) {
  return {Kind::Polynomial, std::move(coeffs), {}};
}

CoefficientFn CoefficientFn::trigonometric(std::vector<double> cos_coeffs, std::vector<double> sin_coeffs) {
  return {Kind::Trigonometric, std::move(cos_coeffs), std::move(sin_coeffs)};
}

double CoefficientFn::operator()(double x) const {
  switch (kind_) {
    case Kind::Constant:
      return coeffs_.empty() ? 0.0 : coeffs_[0];
    case Kind::Polynomial: {
      double acc = 0.0;
      for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
      return acc;
    }
    case Kind::Trigonometric: {
      double acc = 0.0;
      for (std::size_t k = 0; k < coeffs_.size(); ++k) acc += coeffs_[k] * std::cos(static_cast<double>(k) * kPi * x);
      for (std::size_t k = 0; k < sin_coeffs_.size(); ++k)
        acc += sin_coeffs_[k] * std::sin(static_cast<double>(k + 1) * kPi * x);
      return acc;
    }
  }
  return 0.0;
}

double sine_mode(int k, double x) { return std::sqrt(2.0) * std::sin(k * kPi * x); }

StochasticSystem assemble_example2(int N, const Vector& b_coeffs) {
  if (N < 2) throw DomainError("truncation N must be >= 2");
  if (b_coeffs.size() != N) throw DimensionError("b_coeffs must have N entries");
  const double pi2 = kPi * kPi;
  Matrix A = Matrix::Zero(N, N);
  for (int k = 1; k <= N; ++k) A(k - 1, k - 1) = -static_cast<double>(k * k) * pi2;
  Matrix C = Matrix::Zero(N, N);
  C(0, 0) = 1.0;
  Matrix B = b_coeffs;
  return StochasticSystem::with_bounded_noise(std::move(A), std::move(B), std::move(C));
}

Vector project_onto_sine_basis(const CoefficientFn& f, int N, int quad_order) {
  if (N < 1) throw DomainError("N must be >= 1");
  if (quad_order < 1) throw DomainError("quad_order must be >= 1");
  const auto q = composite_gauss(quad_order);
  const auto fv = sample(f, q.x, "f");
  Vector out(N);
  for (int k = 1; k <= N; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.x.size(); ++i) acc += q.w[i] * fv[i] * sine_mode(k, q.x[i]);
    out(k - 1) = acc;
  }
  return out;
}

StochasticSystem assemble_divform_1d(const HeatSystemSpec& spec) {
  const int N = spec.N;
  if (N < 2) throw DomainError("truncation N must be >= 2");
  if (spec.quad_order < 2 * N) throw DomainError("quad_order must be >= 2N");
  const auto ell = check_ellipticity(spec.a, CoefficientFn::constant(0.0), 1.0, 1000);
  if (!(ell.min_margin > 0.0))
    throw EllipticityError("diffusion coefficient a is not positive on (0, 1); min = " +
                           std::to_string(ell.min_margin));

  const auto q = composite_gauss(spec.quad_order);
  const auto nq = q.x.size();
  const auto av = sample(spec.a, q.x, "a");
  const auto cv = sample(spec.c, q.x, "c");
  const auto bv = sample(spec.b, q.x, "b");

  // Row k-1 holds e_k and e_k' at the quadrature nodes.
  Matrix S(N, static_cast<Eigen::Index>(nq)), D(N, static_cast<Eigen::Index>(nq));
  for (int k = 1; k <= N; ++k) {
    for (std::size_t i = 0; i < nq; ++i) {
      const double arg = k * kPi * q.x[i];
      S(k - 1, static_cast<Eigen::Index>(i)) = std::sqrt(2.0) * std::sin(arg);
      D(k - 1, static_cast<Eigen::Index>(i)) = std::sqrt(2.0) * k * kPi * std::cos(arg);
    }
  }

  Matrix A(N, N), C(N, N), B(N, 1);
  parallel_for(N, omp_get_max_threads(), [&](std::int64_t jj) {
    const auto j = static_cast<Eigen::Index>(jj);
    for (Eigen::Index k = 0; k < N; ++k) {
      double a_acc = 0.0, c_acc = 0.0;
      for (std::size_t i = 0; i < nq; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        a_acc += q.w[i] * av[i] * D(j, ii) * D(k, ii);
        c_acc += q.w[i] * S(j, ii) * cv[i] * D(k, ii);
      }
      A(j, k) = -a_acc;
      C(j, k) = c_acc;
    }
    double b_acc = 0.0;
    for (std::size_t i = 0; i < nq; ++i) b_acc += q.w[i] * bv[i] * S(j, static_cast<Eigen::Index>(i));
    B(j, 0) = b_acc;
  });
  return StochasticSystem::with_noise(std::move(A), std::move(B), std::move(C));
}

EllipticityResult check_ellipticity(const CoefficientFn& a, const CoefficientFn& c, double alpha, int grid_points,
                                    double psd_tol) {
  if (!(alpha > 0.5)) throw DomainError("ellipticity constant alpha must exceed 1/2");
  if (grid_points < 100) throw DomainError("ellipticity grid needs at least 100 points");
  double min_margin = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= grid_points; ++i) {
    const double x = static_cast<double>(i) / (grid_points + 1);
    const double av = a(x), cv = c(x);
    if (!std::isfinite(av) || !std::isfinite(cv))
      throw EvaluationError("coefficient is not finite at x = " + std::to_string(x));
    min_margin = std::min(min_margin, av - alpha * cv * cv);
  }
  return {min_margin >= -psd_tol, min_margin};
}

BCoefficientReport b_coefficient_test(const StochasticSystem& sys, const ToleranceConfig& cfg) {
  cfg.validate();
  const Matrix& A = sys.A();
  const double scale = std::max(1.0, norm2(A));
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > cfg.zero_tol * scale)
    throw HypothesisError("b-coefficient test requires a symmetric A");

  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric_part(A));
  const int n = sys.n();
  // Descending eigenvalues: for the Dirichlet Laplacian mode k has -k^2 pi^2.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = n - 1 - i;
  Matrix Q(n, n);
  Vector lam(n);
  for (int i = 0; i < n; ++i) {
    Vector v = es.eigenvectors().col(order[i]);
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v(idx) < 0.0) v = -v;
    Q.col(i) = v;
    lam(i) = es.eigenvalues()(order[i]);
  }

  const Matrix& B = sys.B();
  const double bnorm = norm2(B);
  const Matrix proj = Q.transpose() * B;

  BCoefficientReport out;
  for (int i = 0; i < n; ++i) {
    bool all_zero = true;
    for (int col = 0; col < sys.m(); ++col) {
      const double coef = proj(i, col);
      const bool nz = std::abs(coef) <= cfg.zero_tol * bnorm;
      all_zero = all_zero && nz;
      out.coefficients.push_back({i + 1, col, lam(i), coef, nz});
    }
    if (all_zero) out.flagged_modes.push_back(i + 1);
  }

  const double cluster_tol = cfg.rank_tol * scale;
  for (int i = 0; i < n;) {
    int j = i + 1;
    while (j < n && std::abs(lam(j) - lam(i)) <= cluster_tol) ++j;
    const int size = j - i;
    const Matrix block = proj.middleRows(i, size);
    int rank = 0;
    if (block.size() > 0) {
      Eigen::JacobiSVD<Matrix> svd(block);
      const auto& s = svd.singularValues();
      while (rank < s.size() && s(rank) > cfg.zero_tol * bnorm) ++rank;
    }
    out.clusters.push_back({i + 1, size, lam(i), rank, rank < size});
    i = j;
  }
  return out;
}

}  // namespace sck
