#include "kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace sck {

void hermite_basis(double x, int degree, double* out) {
  out[0] = 1.0;
  if (degree >= 1) out[1] = x;
  for (int i = 2; i <= degree; ++i) out[i] = x * out[i - 1] - (i - 1) * out[i - 2];
}

namespace detail {

Matrix solve_normal_equations(const Matrix& gram, const Matrix& cross) {
  // Jacobi scaling makes the conditioning test independent of basis scale.
  const Vector d = gram.diagonal();
  if ((d.array() <= 0.0).any())
    throw RegressionError("regression design has a zero column; increase n_paths or lower the degree");
  const Vector s = d.cwiseSqrt().cwiseInverse();
  const Matrix scaled = s.asDiagonal() * gram * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(scaled);
  const auto& ev = es.eigenvalues();
  if (!(ev(0) > 1e-12 * ev(ev.size() - 1)))
    throw RegressionError("regression design is rank-deficient; increase n_paths or lower the degree");
  const Matrix rhs = s.asDiagonal() * cross;
  const Matrix sol = es.eigenvectors() * (ev.cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * rhs));
  return s.asDiagonal() * sol;
}

std::vector<double> terminal_brownian(const SimConfig& cfg, int threads) {
  const int N = cfg.steps();
  const double sqrt_dt = std::sqrt(cfg.step_size());
  std::vector<double> W(static_cast<std::size_t>(cfg.n_paths));
  parallel_for(cfg.n_paths, threads, [&](std::int64_t p) {
    double w = 0.0;
    for (int k = 0; k < N; ++k) w += increment(cfg.seed, p, k, sqrt_dt);
    W[p] = w;
  });
  return W;
}

}  // namespace detail

BsdeSolution solve_dual_bsde(const StochasticSystem& sys, const TerminalSpec& terminal, const SimConfig& cfg,
                             const BsdeOptions& options) {
  cfg.validate();
  terminal.check(sys.n());
  if (terminal.depends_on_wt() && cfg.regression_degree < 1)
    throw DomainError("terminals linear in W_T need regression_degree >= 1");

  const int n = sys.n();
  const int N = cfg.steps();
  const std::int64_t P = cfg.n_paths;

  BsdeSolution sol;
  sol.n = n;
  sol.n_paths = P;
  sol.steps = N;
  sol.degree = cfg.regression_degree;
  for (int k = 0; k <= N; ++k) sol.times.push_back(cfg.time(k));
  sol.y_coef.resize(N + 1);
  sol.z_coef.resize(N + 1);
  sol.gram.resize(N + 1);
  sol.y_mean.resize(N + 1);
  sol.y_sq_mean.resize(N + 1);
  sol.z_sq_mean.resize(N + 1);

  std::vector<std::int64_t> slot_of(N + 1, -1);
  if (options.store_stride >= 0) {
    sol.stored_steps = detail::stored_steps(N, options.store_stride);
    for (std::size_t s = 0; s < sol.stored_steps.size(); ++s) slot_of[sol.stored_steps[s]] = static_cast<std::int64_t>(s);
    const auto total = static_cast<std::size_t>(P) * sol.stored_steps.size() * n;
    sol.Y.resize(total);
    sol.Z.resize(total);
  }
  const auto S = static_cast<std::int64_t>(sol.stored_steps.size());

  const int threads = resolve_threads(cfg.threads);
  const std::vector<double> W_T = detail::terminal_brownian(cfg, threads);

  // Ensemble mean of |xi|^2 on the realized W_T.
  {
    double acc = 0.0;
    for (std::int64_t p = 0; p < P; ++p) {
      const double w = terminal.depends_on_wt() ? W_T[p] : 0.0;
      acc += (terminal.xi0 + terminal.xi1 * w).squaredNorm();
    }
    sol.xi_sq_mean = acc / static_cast<double>(P);
  }

  detail::SweepInputs in{sys.A(), sys.C(), terminal, cfg, cfg.regression_degree};
  detail::backward_sweep(in, W_T, [&](const detail::SweepView& v) {
    const int k = v.k;
    sol.y_coef[k] = *v.y_coef;
    sol.z_coef[k] = *v.z_coef;
    sol.gram[k] = *v.gram;
    Vector mean = Vector::Zero(n);
    double ysq = 0.0, zsq = 0.0;
    for (std::int64_t p = 0; p < P; ++p) {
      const double* y = v.Y.data() + p * n;
      const double* z = v.Z.data() + p * n;
      for (int i = 0; i < n; ++i) {
        mean(i) += y[i];
        ysq += y[i] * y[i];
        zsq += z[i] * z[i];
      }
    }
    sol.y_mean[k] = mean / static_cast<double>(P);
    sol.y_sq_mean[k] = ysq / static_cast<double>(P);
    sol.z_sq_mean[k] = zsq / static_cast<double>(P);
    if (slot_of[k] >= 0) {
      const std::int64_t s = slot_of[k];
      parallel_for(P, threads, [&](std::int64_t p) {
        std::copy(v.Y.data() + p * n, v.Y.data() + (p + 1) * n, sol.Y.data() + (p * S + s) * n);
        std::copy(v.Z.data() + p * n, v.Z.data() + (p + 1) * n, sol.Z.data() + (p * S + s) * n);
      });
    }
  });

  if (terminal.kind == TerminalSpec::Kind::Deterministic) {
    std::vector<Vector> exact(N + 1);
    const Matrix At = sys.A().transpose();
    for (int k = 0; k <= N; ++k) exact[k] = semigroup_apply(At, std::max(0.0, cfg.T - cfg.time(k)), terminal.xi0);
    sol.exact_y = std::move(exact);
  }
  return sol;
}

}  // namespace sck
