#pragma once

// Hot loops shared by the Monte Carlo operations. Per-path work is
// distributed with parallel_for; every cross-path reduction runs serially in
// ascending path order so results do not depend on the thread count.

#include "sck/errors.hpp"
#include "sck/parallel.hpp"
#include "sck/rng.hpp"
#include "sck/sde.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace sck::detail {

inline constexpr double kBlowUp = 1e12;

/// Dense matrix copied to row-major storage.
struct DenseRows {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  DenseRows() = default;
  explicit DenseRows(const Matrix& M) : rows(static_cast<int>(M.rows())), cols(static_cast<int>(M.cols())) {
    a.resize(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a[static_cast<std::size_t>(i) * cols + j] = M(i, j);
  }
  double dot_row(int i, const double* x) const {
    const double* r = a.data() + static_cast<std::size_t>(i) * cols;
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += r[j] * x[j];
    return acc;
  }
};

inline double increment(std::uint64_t seed, std::int64_t path, int step, double sqrt_dt) {
  return sqrt_dt * rng::standard_normal(seed, static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(step));
}

/// One Euler-Maruyama step x_out = x + (A x + B u) dt + C x dW.
struct EulerStepper {
  DenseRows A, B, C;
  int n = 0;
  int m = 0;

  EulerStepper(const Matrix& A_, const Matrix& B_, const Matrix& C_)
      : A(A_), B(B_), C(C_), n(static_cast<int>(A_.rows())), m(static_cast<int>(B_.cols())) {}

  void step(const double* x, const double* u, double dt, double dW, double* out) const {
    for (int i = 0; i < n; ++i) {
      const double ax = A.dot_row(i, x);
      const double bu = u ? B.dot_row(i, u) : 0.0;
      const double cx = C.dot_row(i, x);
      out[i] = x[i] + (ax + bu) * dt + cx * dW;
    }
  }
};

inline void check_finite_state(const double* x, int n, std::int64_t path, int step) {
  for (int i = 0; i < n; ++i) {
    if (!(std::abs(x[i]) <= kBlowUp))
      throw StabilityError("ensemble blow-up on path " + std::to_string(path) + " at step " +
                           std::to_string(step) + "; reduce dt");
  }
}

/// Ordinary least squares through the normal equations with a rank check.
/// gram is (1/N) sum phi phi^T, cross is (1/N) sum phi y^T.
Matrix solve_normal_equations(const Matrix& gram, const Matrix& cross);

/// Data handed to a sweep visitor at grid step k (k = steps .. 0).
struct SweepView {
  int k = 0;
  int degree = 0;                       ///< basis degree at this step
  double scale = 1.0;                   ///< standardization sqrt(t_k) (1 at t = 0)
  std::span<const double> W;            ///< W_k per path
  std::span<const double> dW;           ///< increment over [t_k, t_{k+1}); empty at k = steps
  std::span<const double> Y;            ///< fitted Y_k, [path][n]
  std::span<const double> Y_next;       ///< fitted Y_{k+1}; empty at k = steps
  std::span<const double> Z;            ///< Z_k, [path][n]; zero at k = steps
  const Matrix* y_coef = nullptr;
  const Matrix* z_coef = nullptr;
  const Matrix* gram = nullptr;
};

struct SweepInputs {
  Matrix A;
  Matrix C;
  TerminalSpec terminal;
  SimConfig cfg;
  int degree = 0;  ///< regression degree for t > 0
};

/// Grid steps kept by a storage stride (always 0 and steps; stride <= 0
/// keeps only those two).
std::vector<int> stored_steps(int steps, int stride);

/// W_T per path with the same summation order as the forward kernels.
std::vector<double> terminal_brownian(const SimConfig& cfg, int threads);

/// Backward sweep for the dual equation through the flow adjoint:
///   v_T = xi,  v_k = (I + A dt + C dW_k)^T v_{k+1},
///   Y_k = E[v_k | W_k]  (regression),
///   Z_k = slope of Y_{k+1} against dW_k / dt given W_k (regression).
/// visit(const SweepView&) is called for k = steps down to 0.
template <class Visitor>
void backward_sweep(const SweepInputs& in, std::span<const double> W_T, Visitor&& visit) {
  const SimConfig& cfg = in.cfg;
  const int n = static_cast<int>(in.A.rows());
  const std::int64_t P = cfg.n_paths;
  const int N = cfg.steps();
  const double dt = cfg.step_size();
  const double sqrt_dt = std::sqrt(dt);
  const int threads = resolve_threads(cfg.threads);
  const DenseRows At(in.A.transpose());
  const DenseRows Ct(in.C.transpose());
  const auto un = static_cast<std::size_t>(n);

  std::vector<double> W(W_T.begin(), W_T.end());
  std::vector<double> dW(static_cast<std::size_t>(P), 0.0);
  std::vector<double> v(static_cast<std::size_t>(P) * un);
  std::vector<double> Y(static_cast<std::size_t>(P) * un), Y_next(static_cast<std::size_t>(P) * un);
  std::vector<double> Z(static_cast<std::size_t>(P) * un, 0.0);
  std::vector<double> scratch(static_cast<std::size_t>(P) * un);

  const auto& term = in.terminal;
  const bool random_terminal = term.kind == TerminalSpec::Kind::LinearInWT;
  parallel_for(P, threads, [&](std::int64_t p) {
    double* vp = v.data() + p * n;
    for (int i = 0; i < n; ++i) vp[i] = term.xi0(i) + (random_terminal ? term.xi1(i) * W[p] : 0.0);
  });

  // Fits the rows of `target` ([path][n]) on He_0..He_d(W / scale), serially
  // reduced; writes fitted values into `fitted`.
  auto fit = [&](int d, double scale, const std::vector<double>& target, std::vector<double>& fitted, Matrix& coef,
                 Matrix& gram) {
    const int nb = d + 1;
    gram = Matrix::Zero(nb, nb);
    Matrix cross = Matrix::Zero(nb, n);
    std::vector<double> phi(static_cast<std::size_t>(nb));
    for (std::int64_t p = 0; p < P; ++p) {
      hermite_basis(W[p] / scale, d, phi.data());
      const double* yp = target.data() + p * n;
      for (int a = 0; a < nb; ++a) {
        for (int b = 0; b < nb; ++b) gram(a, b) += phi[a] * phi[b];
        for (int i = 0; i < n; ++i) cross(a, i) += phi[a] * yp[i];
      }
    }
    gram /= static_cast<double>(P);
    cross /= static_cast<double>(P);
    coef = solve_normal_equations(gram, cross);
    parallel_for(P, threads, [&](std::int64_t p) {
      double basis[16];
      hermite_basis(W[p] / scale, d, basis);
      double* fp = fitted.data() + p * n;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int a = 0; a < nb; ++a) acc += basis[a] * coef(a, i);
        fp[i] = acc;
      }
    });
  };

  // Regresses Y_next on [He_a(W/scale), He_a(W/scale) dW/sqrt(dt)] and keeps
  // the second block: Z_k = sum_a beta_a He_a / sqrt(dt).
  auto fit_z = [&](int d, double scale, Matrix& zcoef) {
    const int nb = d + 1;
    Matrix gram = Matrix::Zero(2 * nb, 2 * nb);
    Matrix cross = Matrix::Zero(2 * nb, n);
    std::vector<double> psi(static_cast<std::size_t>(2 * nb));
    for (std::int64_t p = 0; p < P; ++p) {
      hermite_basis(W[p] / scale, d, psi.data());
      const double g = dW[p] / sqrt_dt;
      for (int a = 0; a < nb; ++a) psi[nb + a] = psi[a] * g;
      const double* yp = Y_next.data() + p * n;
      for (int a = 0; a < 2 * nb; ++a) {
        for (int b = 0; b < 2 * nb; ++b) gram(a, b) += psi[a] * psi[b];
        for (int i = 0; i < n; ++i) cross(a, i) += psi[a] * yp[i];
      }
    }
    gram /= static_cast<double>(P);
    cross /= static_cast<double>(P);
    const Matrix beta = solve_normal_equations(gram, cross);
    zcoef = beta.bottomRows(nb) / sqrt_dt;
    parallel_for(P, threads, [&](std::int64_t p) {
      double basis[16];
      hermite_basis(W[p] / scale, d, basis);
      double* zp = Z.data() + p * n;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int a = 0; a < nb; ++a) acc += basis[a] * zcoef(a, i);
        zp[i] = acc;
      }
    });
  };

  Matrix y_coef, z_coef, gram;
  {
    const int d = random_terminal ? in.degree : 0;
    const double scale = std::sqrt(cfg.T);
    fit(d, scale, v, Y, y_coef, gram);
    z_coef = Matrix::Zero(d + 1, n);
    SweepView view;
    view.k = N;
    view.degree = d;
    view.scale = scale;
    view.W = W;
    view.Y = Y;
    view.Z = Z;
    view.y_coef = &y_coef;
    view.z_coef = &z_coef;
    view.gram = &gram;
    visit(static_cast<const SweepView&>(view));
  }

  for (int k = N - 1; k >= 0; --k) {
    std::swap(Y, Y_next);
    parallel_for(P, threads, [&](std::int64_t p) {
      dW[p] = increment(cfg.seed, p, k, sqrt_dt);
      W[p] -= dW[p];
      const double* vp = v.data() + p * n;
      double* sp = scratch.data() + p * n;
      for (int i = 0; i < n; ++i) sp[i] = vp[i] + (At.dot_row(i, vp) * dt + Ct.dot_row(i, vp) * dW[p]);
    });
    std::swap(v, scratch);
    if (k == 0) {
      // F_0 is trivial: W_0 = 0 exactly.
      std::fill(W.begin(), W.end(), 0.0);
    }
    const int d = (k == 0 || !random_terminal) ? 0 : in.degree;
    const double scale = k == 0 ? 1.0 : std::sqrt(cfg.time(k));
    fit(d, scale, v, Y, y_coef, gram);
    fit_z(d, scale, z_coef);

    SweepView view;
    view.k = k;
    view.degree = d;
    view.scale = scale;
    view.W = W;
    view.dW = dW;
    view.Y = Y;
    view.Y_next = Y_next;
    view.Z = Z;
    view.y_coef = &y_coef;
    view.z_coef = &z_coef;
    view.gram = &gram;
    visit(static_cast<const SweepView&>(view));
  }
}

}  // namespace sck::detail
