#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sck {

namespace {

struct MeanAndError {
  double mean = 0.0;
  double std_error = 0.0;
};

// Serial, path-ordered sample mean and standard error of the mean.
MeanAndError summarize(const std::vector<double>& x) {
  const auto P = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / P;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = x.size() > 1 ? ss / (P - 1.0) : 0.0;
  return {mean, std::sqrt(var / P)};
}

double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

constexpr double kFeedbackStorageLimit = 1024.0 * 1024.0 * 1024.0;

}  // namespace

DualityReport duality_check(const StochasticSystem& sys, const Vector& x0, const ControlSpec& control,
                            const TerminalSpec& terminal, const SimConfig& cfg) {
  cfg.validate();
  control.check(sys, cfg);
  terminal.check(sys.n());
  if (x0.size() != sys.n()) throw DimensionError("x0 must have n entries");
  require_finite(x0, "x0");
  if (terminal.depends_on_wt() && cfg.regression_degree < 1)
    throw DomainError("terminals linear in W_T need regression_degree >= 1");

  const int n = sys.n();
  const int m = sys.m();
  const int N = cfg.steps();
  const double dt = cfg.step_size();
  const double sqrt_dt = std::sqrt(dt);
  const std::int64_t P = cfg.n_paths;
  const int threads = resolve_threads(cfg.threads);
  const bool feedback = control.depends_on_state();

  // Feedback controls are path dependent; B u_k is kept for the backward pass.
  std::vector<double> bu_path;
  if (feedback) {
    const double bytes = static_cast<double>(P) * N * n * sizeof(double);
    if (bytes > kFeedbackStorageLimit)
      throw DomainError("feedback duality check would store " + std::to_string(bytes / 1e9) +
                        " GB of controls; reduce n_paths or steps");
    bu_path.resize(static_cast<std::size_t>(P) * N * n);
  }

  std::vector<double> lhs(static_cast<std::size_t>(P)), W_T(static_cast<std::size_t>(P));
  const detail::EulerStepper stepper(sys.A(), sys.B(), sys.C());
  parallel_for(P, threads, [&](std::int64_t p) {
    std::vector<double> x(x0.data(), x0.data() + n), next(n), u(m);
    double w = 0.0;
    for (int k = 0; k < N; ++k) {
      const double dW = detail::increment(cfg.seed, p, k, sqrt_dt);
      w += dW;
      control.evaluate(k, x.data(), n, u.data());
      if (feedback) {
        double* out = bu_path.data() + (static_cast<std::size_t>(p) * N + k) * n;
        for (int i = 0; i < n; ++i) out[i] = stepper.B.dot_row(i, u.data());
      }
      stepper.step(x.data(), u.data(), dt, dW, next.data());
      detail::check_finite_state(next.data(), n, p, k + 1);
      std::swap(x, next);
    }
    W_T[p] = w;
    double acc = 0.0;
    const double wt = terminal.depends_on_wt() ? w : 0.0;
    for (int i = 0; i < n; ++i) acc += x[i] * (terminal.xi0(i) + terminal.xi1(i) * wt);
    lhs[p] = acc;
  });

  // Deterministic controls: B u_k shared by all paths.
  std::vector<double> bu_shared;
  if (!feedback) {
    bu_shared.resize(static_cast<std::size_t>(N) * n);
    std::vector<double> u(m);
    for (int k = 0; k < N; ++k) {
      control.evaluate(k, nullptr, n, u.data());
      for (int i = 0; i < n; ++i) bu_shared[static_cast<std::size_t>(k) * n + i] = stepper.B.dot_row(i, u.data());
    }
  }

  std::vector<double> rhs(static_cast<std::size_t>(P), 0.0);
  detail::SweepInputs in{sys.A(), sys.C(), terminal, cfg, cfg.regression_degree};
  detail::backward_sweep(in, W_T, [&](const detail::SweepView& v) {
    if (v.k == N) return;
    const int k = v.k;
    parallel_for(P, threads, [&](std::int64_t p) {
      const double* bu = feedback ? bu_path.data() + (static_cast<std::size_t>(p) * N + k) * n
                                  : bu_shared.data() + static_cast<std::size_t>(k) * n;
      const double* y = v.Y.data() + p * n;
      const double* y_next = v.Y_next.data() + p * n;
      double r = rhs[p] + 0.5 * dt * (dot(bu, y, n) + dot(bu, y_next, n));
      if (k == 0) r += dot(x0.data(), y, n);
      rhs[p] = r;
    });
  });

  const auto L = summarize(lhs);
  const auto R = summarize(rhs);
  DualityReport rep;
  rep.lhs = L.mean;
  rep.rhs = R.mean;
  rep.std_error = std::sqrt(L.std_error * L.std_error + R.std_error * R.std_error);
  const double c = norm2(sys.C());
  rep.bias_allowance = (1.0 + norm2(sys.A()) + c * c) * (std::abs(rep.lhs) + std::abs(rep.rhs) + 1.0);
  rep.tolerance = 3.0 * rep.std_error + dt * rep.bias_allowance;
  rep.pass = std::abs(rep.lhs - rep.rhs) <= rep.tolerance;
  rep.experimental = feedback;
  return rep;
}

GirsanovReport girsanov_check(const StochasticSystem& sys, double lambda, const Vector& x0,
                              const ControlSpec& control, const SimConfig& cfg, const std::vector<double>& dt_list) {
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  if (dt_list.empty()) throw DomainError("dt_list must not be empty");
  for (std::size_t i = 1; i < dt_list.size(); ++i)
    if (!(dt_list[i] < dt_list[i - 1])) throw DomainError("dt_list must be strictly decreasing");
  if (x0.size() != sys.n()) throw DimensionError("x0 must have n entries");
  require_finite(x0, "x0");
  if (control.kind() == ControlSpec::Kind::PiecewiseConstant)
    throw DomainError("girsanov check needs a control independent of the step size");

  const int n = sys.n();
  const int m = sys.m();
  const Matrix A_l = sys.A() + lambda * sys.C();
  const Matrix C_l = sys.C() + lambda * Matrix::Identity(n, n);
  const detail::EulerStepper orig(sys.A(), sys.B(), sys.C());
  const detail::EulerStepper tilde(A_l, sys.B(), C_l);

  GirsanovReport rep;
  rep.lambda = lambda;
  for (double dt_row : dt_list) {
    SimConfig c = cfg;
    c.dt = dt_row;
    c.validate();
    control.check(sys, c);
    const int N = c.steps();
    const double dt = c.step_size();
    const double sqrt_dt = std::sqrt(dt);
    const std::int64_t P = c.n_paths;
    std::vector<double> err(static_cast<std::size_t>(P));
    parallel_for(P, resolve_threads(c.threads), [&](std::int64_t p) {
      std::vector<double> x(x0.data(), x0.data() + n), xt = x, xn(n), xtn(n), u(m), v(m);
      double w = 0.0;
      double expo = 1.0;
      double worst = 0.0;
      for (int k = 0; k < N; ++k) {
        const double dW = detail::increment(c.seed, p, k, sqrt_dt);
        control.evaluate(k, x.data(), n, u.data());
        for (int i = 0; i < m; ++i) v[i] = expo * u[i];
        orig.step(x.data(), u.data(), dt, dW, xn.data());
        tilde.step(xt.data(), v.data(), dt, dW, xtn.data());
        detail::check_finite_state(xn.data(), n, p, k + 1);
        detail::check_finite_state(xtn.data(), n, p, k + 1);
        std::swap(x, xn);
        std::swap(xt, xtn);
        w += dW;
        expo = std::exp(lambda * w - 0.5 * lambda * lambda * c.time(k + 1));
        double e2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const double d = expo * x[i] - xt[i];
          e2 += d * d;
        }
        worst = std::max(worst, std::sqrt(e2));
      }
      err[p] = worst;
    });
    const auto s = summarize(err);
    rep.rows.push_back({dt, s.mean, s.std_error});
  }

  rep.monotone = rep.rows.size() >= 2;
  bool positive = true;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    positive = positive && rep.rows[i].sup_error > 0.0;
    if (i > 0 && !(rep.rows[i].sup_error < rep.rows[i - 1].sup_error)) rep.monotone = false;
  }
  if (positive && rep.rows.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (const auto& r : rep.rows) {
      mx += std::log(r.dt);
      my += std::log(r.sup_error);
    }
    mx /= static_cast<double>(rep.rows.size());
    my /= static_cast<double>(rep.rows.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& r : rep.rows) {
      sxy += (std::log(r.dt) - mx) * (std::log(r.sup_error) - my);
      sxx += (std::log(r.dt) - mx) * (std::log(r.dt) - mx);
    }
    rep.fitted_order = sxy / sxx;
  }
  return rep;
}

AprioriReport apriori_bound_check(const StochasticSystem& sys, const std::vector<TerminalSpec>& terminals,
                                  const SimConfig& cfg) {
  cfg.validate();
  if (terminals.size() < 5) throw DomainError("apriori check needs at least 5 terminal samples");
  for (const auto& t : terminals) t.check(sys.n());
  std::vector<double> norms;
  for (const auto& t : terminals) norms.push_back(std::sqrt(t.mean_square(cfg.T)));
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (!(norms[i] > 0.0)) throw DomainError("terminal samples must be nonzero");
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(norms[i] - norms[j]) <= 1e-12 * std::max(norms[i], norms[j]))
        throw DomainError("terminal samples must have distinct norms");
  }

  const int n = sys.n();
  const double dt = cfg.step_size();
  AprioriReport rep;
  // Shape of a sample: (xi0, xi1) scaled to unit analytic norm, up to sign.
  std::vector<Vector> shapes;
  for (std::size_t s = 0; s < terminals.size(); ++s) {
    const auto& t = terminals[s];
    const auto sol = solve_dual_bsde(sys, t, cfg);
    AprioriSample a;
    a.xi_norm = norms[s];
    a.sup_y_sq = *std::max_element(sol.y_sq_mean.begin(), sol.y_sq_mean.end());
    for (int k = 0; k < sol.steps; ++k) a.int_z_sq += sol.z_sq_mean[k] * dt;
    a.xi_sq_mean = sol.xi_sq_mean;
    if (!(a.xi_sq_mean > 0.0)) throw DomainError("terminal sample has zero empirical mean square");
    a.ratio = (a.sup_y_sq + a.int_z_sq) / a.xi_sq_mean;
    if (sol.exact_y) {
      double sup = 0.0;
      for (const auto& y : *sol.exact_y) sup = std::max(sup, y.squaredNorm());
      a.exact_ratio = sup / t.xi0.squaredNorm();
    }

    Vector shape(2 * n);
    shape << t.xi0, (t.depends_on_wt() ? Vector(t.xi1) : Vector::Zero(n));
    shape /= shape.norm();
    Eigen::Index idx = 0;
    shape.cwiseAbs().maxCoeff(&idx);
    if (shape(idx) < 0.0) shape = -shape;
    int group = -1;
    for (std::size_t g = 0; g < shapes.size(); ++g)
      if ((shapes[g] - shape).norm() <= 1e-9) group = static_cast<int>(g);
    if (group < 0) {
      group = static_cast<int>(shapes.size());
      shapes.push_back(shape);
    }
    a.shape_group = group;
    rep.k_hat = std::max(rep.k_hat, a.ratio);
    rep.samples.push_back(a);
  }

  for (std::size_t g = 0; g < shapes.size(); ++g) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    int count = 0;
    for (const auto& a : rep.samples) {
      if (a.shape_group != static_cast<int>(g)) continue;
      lo = std::min(lo, a.ratio);
      hi = std::max(hi, a.ratio);
      ++count;
    }
    if (count >= 2 && lo > 0.0) rep.max_spread = std::max(rep.max_spread, hi / lo);
  }
  rep.scale_invariant = rep.max_spread <= 1.5;
  return rep;
}

namespace {

// sup over grid times and probes of |e^{tG1} x - e^{tG2} x|.
double semigroup_gap(const Matrix& G1, const Matrix& G2, const std::vector<double>& times,
                     const std::vector<Vector>& probes) {
  double worst = 0.0;
  for (double t : times) {
    const Matrix E1 = semigroup(G1, t);
    const Matrix E2 = semigroup(G2, t);
    for (const auto& x : probes) worst = std::max(worst, (E1 * x - E2 * x).norm());
  }
  return worst;
}

bool strictly_decreasing(const std::vector<double>& v) {
  if (v.size() < 2) return false;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

}  // namespace

ConvergenceTable approximation_convergence(const StochasticSystem& sys, const TerminalSpec& terminal,
                                           const SimConfig& cfg, const std::vector<double>& n_list,
                                           const std::vector<double>& delta_list,
                                           const ConvergenceOptions& options) {
  cfg.validate();
  if (n_list.empty() || delta_list.empty()) throw DomainError("n_list and delta_list must not be empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (!(n_list[i] >= 1.0)) throw DomainError("n_list entries must be >= 1");
    if (i > 0 && !(n_list[i] > n_list[i - 1])) throw DomainError("n_list must be strictly increasing");
  }
  for (std::size_t i = 0; i < delta_list.size(); ++i) {
    if (!(delta_list[i] > 0.0)) throw DomainError("delta_list entries must be positive");
    if (i > 0 && !(delta_list[i] < delta_list[i - 1])) throw DomainError("delta_list must be strictly decreasing");
  }
  if (!std::isfinite(options.lambda)) throw DomainError("lambda must be finite");

  const int n = sys.n();
  const Matrix& A = sys.A();
  const double lambda = options.lambda;

  std::vector<Vector> probes;
  for (int i = 0; i < n; ++i) probes.push_back(Vector::Unit(n, i));
  probes.push_back(Vector::Ones(n) / std::sqrt(static_cast<double>(n)));
  std::vector<double> times;
  for (int k = 0; k <= cfg.steps(); ++k) times.push_back(cfg.time(k));

  const Matrix G_orig = A + lambda * sys.C();

  ConvergenceTable table;
  table.lambda = lambda;
  const auto nd = delta_list.size();
  // Mollified noise J^T E^T C1 E J + C2 per (n, delta); row index = i * nd + j.
  std::vector<Matrix> mollified;
  std::vector<Matrix> drift;
  for (double nres : n_list) {
    const auto yp = yosida(A, nres);
    for (double delta : delta_list) {
      const Matrix E = semigroup(A, delta);
      const Matrix Cm = E.transpose() * sys.C() * E;
      const Matrix G_moll = A + lambda * Cm;
      const Matrix G_approx = yp.An + lambda * (yp.J.transpose() * Cm * yp.J);
      SemigroupRow row;
      row.nres = nres;
      row.delta = delta;
      row.err_n = semigroup_gap(G_approx, G_moll, times, probes);
      row.err_delta = semigroup_gap(G_moll, G_orig, times, probes);
      row.err_total = semigroup_gap(G_approx, G_orig, times, probes);
      table.semigroup.push_back(row);
      mollified.push_back(yp.J.transpose() * E.transpose() * sys.C1() * E * yp.J + sys.C2());
      drift.push_back(yp.An);
    }
  }

  table.n_monotone = true;
  for (std::size_t j = 0; j < nd; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < n_list.size(); ++i) col.push_back(table.semigroup[i * nd + j].err_n);
    table.n_monotone = table.n_monotone && strictly_decreasing(col);
  }
  table.delta_monotone = true;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < nd; ++j) row.push_back(table.semigroup[i * nd + j].err_delta);
    table.delta_monotone = table.delta_monotone && strictly_decreasing(row);
  }

  if (options.run_bsde) {
    terminal.check(n);
    const auto base = solve_dual_bsde(sys, terminal, cfg);
    for (std::size_t r = 0; r < mollified.size(); ++r) {
      const StochasticSystem approx(drift[r], sys.B(), Matrix::Zero(n, n), mollified[r], sys.gamma());
      const auto sol = solve_dual_bsde(approx, terminal, cfg);
      double sup = 0.0;
      for (int k = 0; k <= base.steps; ++k) {
        // Same seed, same basis values: mean |dY|^2 = tr(D^T G D).
        const Matrix D = sol.y_coef[k] - base.y_coef[k];
        sup = std::max(sup, (D.transpose() * base.gram[k] * D).trace());
      }
      table.bsde.push_back({table.semigroup[r].nres, table.semigroup[r].delta, sup});
    }
    table.bsde_n_monotone = true;
    for (std::size_t j = 0; j < nd; ++j) {
      std::vector<double> col;
      for (std::size_t i = 0; i < n_list.size(); ++i) col.push_back(table.bsde[i * nd + j].sup_mean_sq);
      table.bsde_n_monotone = table.bsde_n_monotone && strictly_decreasing(col);
    }
    table.bsde_delta_monotone = true;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      std::vector<double> row;
      for (std::size_t j = 0; j < nd; ++j) row.push_back(table.bsde[i * nd + j].sup_mean_sq);
      table.bsde_delta_monotone = table.bsde_delta_monotone && strictly_decreasing(row);
    }
  }
  return table;
}

}  // namespace sck
