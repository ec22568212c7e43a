// Straightforward serial versions of the ensemble kernels. Every intermediate
// array is materialized and conditional expectations use a QR least-squares
// solve, so these double as an independent cross-check.

#include "kernels.hpp"

#include <Eigen/QR>

#include <cmath>

namespace sck::reference {

namespace {

Matrix increments(const SimConfig& cfg) {
  const int N = cfg.steps();
  const double sqrt_dt = std::sqrt(cfg.step_size());
  Matrix dW(cfg.n_paths, N);
  for (std::int64_t p = 0; p < cfg.n_paths; ++p)
    for (int k = 0; k < N; ++k)
      dW(p, k) = sqrt_dt * rng::standard_normal(cfg.seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k));
  return dW;
}

Matrix design(const Vector& w, double scale, int degree) {
  Matrix X(w.size(), degree + 1);
  std::vector<double> phi(degree + 1);
  for (Eigen::Index p = 0; p < w.size(); ++p) {
    hermite_basis(w(p) / scale, degree, phi.data());
    for (int a = 0; a <= degree; ++a) X(p, a) = phi[a];
  }
  return X;
}

}  // namespace

PathEnsemble simulate_forward(const StochasticSystem& sys, const Vector& x0, const ControlSpec& control,
                              const SimConfig& cfg) {
  cfg.validate();
  control.check(sys, cfg);
  if (x0.size() != sys.n()) throw DimensionError("x0 must have n entries");
  const int n = sys.n();
  const int N = cfg.steps();
  const double dt = cfg.step_size();
  const Matrix dW = increments(cfg);

  PathEnsemble ens;
  ens.n = n;
  ens.n_paths = cfg.n_paths;
  ens.steps = N;
  for (int k = 0; k <= N; ++k) {
    ens.stored_steps.push_back(k);
    ens.times.push_back(cfg.time(k));
  }
  ens.states.resize(static_cast<std::size_t>(cfg.n_paths) * (N + 1) * n);
  ens.increments.resize(static_cast<std::size_t>(cfg.n_paths) * N);
  for (std::int64_t p = 0; p < cfg.n_paths; ++p) {
    Vector x = x0;
    Vector u(sys.m());
    Eigen::Map<Matrix>(ens.states.data() + p * (N + 1) * n, n, N + 1).col(0) = x;
    for (int k = 0; k < N; ++k) {
      ens.increments[static_cast<std::size_t>(p) * N + k] = dW(p, k);
      control.evaluate(k, x.data(), n, u.data());
      x = x + (sys.A() * x + sys.B() * u) * dt + sys.C() * x * dW(p, k);
      if (!(x.cwiseAbs().maxCoeff() <= detail::kBlowUp)) throw StabilityError("ensemble blow-up; reduce dt");
      Eigen::Map<Matrix>(ens.states.data() + p * (N + 1) * n, n, N + 1).col(k + 1) = x;
    }
  }
  return ens;
}

BsdeSolution solve_dual_bsde(const StochasticSystem& sys, const TerminalSpec& terminal, const SimConfig& cfg) {
  cfg.validate();
  terminal.check(sys.n());
  const int n = sys.n();
  const int N = cfg.steps();
  const std::int64_t P = cfg.n_paths;
  const double dt = cfg.step_size();
  const bool random = terminal.depends_on_wt();
  const Matrix dW = increments(cfg);

  // W(p, k) for k = 0..N.
  Matrix W = Matrix::Zero(P, N + 1);
  for (int k = 0; k < N; ++k) W.col(k + 1) = W.col(k) + dW.col(k);

  // v_k for every path and step: [k] -> P x n.
  std::vector<Matrix> v(N + 1);
  v[N] = Matrix(P, n);
  for (std::int64_t p = 0; p < P; ++p)
    v[N].row(p) = (terminal.xi0 + terminal.xi1 * (random ? W(p, N) : 0.0)).transpose();
  for (int k = N - 1; k >= 0; --k) {
    v[k] = Matrix(P, n);
    for (std::int64_t p = 0; p < P; ++p) {
      const Matrix M = Matrix::Identity(n, n) + sys.A() * dt + sys.C() * dW(p, k);
      v[k].row(p) = (M.transpose() * v[k + 1].row(p).transpose()).transpose();
    }
  }

  BsdeSolution sol;
  sol.n = n;
  sol.n_paths = P;
  sol.steps = N;
  sol.degree = cfg.regression_degree;
  sol.y_coef.resize(N + 1);
  sol.z_coef.resize(N + 1);
  sol.gram.resize(N + 1);
  sol.y_mean.resize(N + 1);
  sol.y_sq_mean.resize(N + 1);
  sol.z_sq_mean.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    sol.times.push_back(cfg.time(k));
    sol.stored_steps.push_back(k);
  }
  sol.Y.assign(static_cast<std::size_t>(P) * (N + 1) * n, 0.0);
  sol.Z.assign(static_cast<std::size_t>(P) * (N + 1) * n, 0.0);

  std::vector<Matrix> Yk(N + 1);
  for (int k = N; k >= 0; --k) {
    const int d = (k == 0 || !random) ? 0 : cfg.regression_degree;
    const double scale = k == 0 ? 1.0 : std::sqrt(cfg.time(k));
    const Vector w = k == 0 ? Vector::Zero(P) : Vector(W.col(k));
    const Matrix X = design(w, scale, d);
    sol.y_coef[k] = X.colPivHouseholderQr().solve(v[k]);
    sol.gram[k] = X.transpose() * X / static_cast<double>(P);
    Yk[k] = X * sol.y_coef[k];
    Matrix Zk = Matrix::Zero(P, n);
    if (k < N) {
      Matrix X2(P, 2 * (d + 1));
      X2 << X, (X.array().colwise() * (dW.col(k).array() / std::sqrt(dt))).matrix();
      const Matrix beta = X2.colPivHouseholderQr().solve(Yk[k + 1]);
      sol.z_coef[k] = beta.bottomRows(d + 1) / std::sqrt(dt);
      Zk = X * sol.z_coef[k];
    } else {
      sol.z_coef[k] = Matrix::Zero(d + 1, n);
    }
    sol.y_mean[k] = Yk[k].colwise().mean().transpose();
    sol.y_sq_mean[k] = Yk[k].rowwise().squaredNorm().mean();
    sol.z_sq_mean[k] = Zk.rowwise().squaredNorm().mean();
    for (std::int64_t p = 0; p < P; ++p)
      for (int i = 0; i < n; ++i) {
        sol.Y[(static_cast<std::size_t>(p) * (N + 1) + k) * n + i] = Yk[k](p, i);
        sol.Z[(static_cast<std::size_t>(p) * (N + 1) + k) * n + i] = Zk(p, i);
      }
  }
  sol.xi_sq_mean = v[N].rowwise().squaredNorm().mean();
  if (!random) {
    std::vector<Vector> exact(N + 1);
    for (int k = 0; k <= N; ++k)
      exact[k] = semigroup_apply(sys.A().transpose(), std::max(0.0, cfg.T - cfg.time(k)), terminal.xi0);
    sol.exact_y = std::move(exact);
  }
  return sol;
}

}  // namespace sck::reference
