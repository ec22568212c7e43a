#pragma once

#include "sck/system_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace sck {

/// Monte Carlo discretization parameters. The time grid is uniform with
/// steps() = T / dt intervals.
struct SimConfig {
  double T = 1.0;
  double dt = 1e-2;
  std::int64_t n_paths = 1000;
  std::uint64_t seed = 0;
  int regression_degree = 2;  ///< polynomial degree in W_t for conditional expectations
  int threads = 1;            ///< 0 = all available; never changes results

  void validate() const;
  int steps() const;
  /// T / steps(), the step actually used.
  double step_size() const { return T / steps(); }
  double time(int k) const { return k * step_size(); }
};

/// Control process for the forward equation.
class ControlSpec {
 public:
  enum class Kind { Zero, Constant, PiecewiseConstant, Feedback };

  static ControlSpec zero(int m);
  static ControlSpec constant(Vector u);
  /// Column k is the control on [t_k, t_{k+1}); needs one column per step.
  static ControlSpec piecewise_constant(Matrix values);
  /// u_t = K X_t with K of shape m x n.
  static ControlSpec feedback(Matrix K);

  Kind kind() const { return kind_; }
  int m() const;
  const Vector& value() const { return value_; }
  const Matrix& matrix() const { return matrix_; }

  /// Control at step k for the state x (x is ignored unless feedback).
  void evaluate(int k, const double* x, int n, double* u) const;
  bool depends_on_state() const { return kind_ == Kind::Feedback; }
  /// Throws DimensionError/DomainError if inconsistent with sys or cfg.
  void check(const StochasticSystem& sys, const SimConfig& cfg) const;

 private:
  Kind kind_ = Kind::Zero;
  Vector value_;
  Matrix matrix_;
};

/// Terminal condition of the dual backward equation.
struct TerminalSpec {
  enum class Kind { Deterministic, LinearInWT };
  Kind kind = Kind::Deterministic;
  Vector xi0;  ///< deterministic part
  Vector xi1;  ///< coefficient of W_T (LinearInWT only)

  static TerminalSpec deterministic(Vector xi);
  /// xi = xi0 + xi1 W_T
  static TerminalSpec linear_in_wt(Vector xi0, Vector xi1);

  bool depends_on_wt() const { return kind == Kind::LinearInWT; }
  /// E|xi|^2 at horizon T.
  double mean_square(double T) const;
  void check(int n) const;
};

/// Stored forward trajectories. States are kept every store_stride steps
/// (always including the final time).
struct PathEnsemble {
  int n = 0;
  std::int64_t n_paths = 0;
  int steps = 0;
  std::vector<int> stored_steps;
  std::vector<double> times;      ///< times of the stored steps
  std::vector<double> states;     ///< [path][stored][n]
  std::vector<double> increments; ///< [path][step]; empty if not kept

  Eigen::Map<const Vector> state(std::int64_t path, std::size_t stored) const {
    return Eigen::Map<const Vector>(states.data() + (path * static_cast<std::int64_t>(times.size()) +
                                                     static_cast<std::int64_t>(stored)) * n, n);
  }
  double increment(std::int64_t path, int step) const { return increments[path * steps + step]; }
};

/// Stored fundamental matrices Phi(0, t) of the uncontrolled equation.
struct FlowEnsemble {
  int n = 0;
  std::int64_t n_paths = 0;
  int steps = 0;
  std::vector<int> stored_steps;
  std::vector<double> times;
  std::vector<double> flows;  ///< [path][stored][n*n], column-major blocks

  Eigen::Map<const Matrix> flow(std::int64_t path, std::size_t stored) const {
    return Eigen::Map<const Matrix>(flows.data() + (path * static_cast<std::int64_t>(times.size()) +
                                                    static_cast<std::int64_t>(stored)) * n * n, n, n);
  }
};

struct StorageOptions {
  int store_stride = 1;         ///< 0 keeps only t = 0 and t = T
  bool keep_increments = true;
};

/// Euler-Maruyama for dX = (A X + B u) dt + C X dW.
PathEnsemble simulate_forward(const StochasticSystem& sys, const Vector& x0, const ControlSpec& control,
                              const SimConfig& cfg, const StorageOptions& storage = {});

/// Same scheme applied to the identity matrix with u = 0.
FlowEnsemble simulate_flow(const StochasticSystem& sys, const SimConfig& cfg, const StorageOptions& storage = {});

/// Solution of dY = -(A^T Y + C^T Z) dt + Z dW, Y_T = xi.
///
/// Conditional expectations are represented by regression on probabilists'
/// Hermite polynomials of the standardized Brownian value W_t / sqrt(t):
///   Y_k(path) = sum_i y_coef[k](i, :) He_i(W_k / sqrt(t_k)),
///   Z_k(path) = sum_i z_coef[k](i, :) He_i(W_k / sqrt(t_k)).
/// At t = 0 only the constant term is present.
struct BsdeSolution {
  int n = 0;
  std::int64_t n_paths = 0;
  int steps = 0;
  int degree = 0;                 ///< regression degree used for t > 0
  std::vector<double> times;      ///< full grid
  std::vector<Matrix> y_coef;     ///< per grid time
  std::vector<Matrix> z_coef;     ///< per grid time; zero at T
  std::vector<Matrix> gram;       ///< (1/n_paths) sum phi phi^T per grid time
  std::vector<Vector> y_mean;     ///< ensemble mean of Y_k
  std::vector<double> y_sq_mean;  ///< ensemble mean of |Y_k|^2
  std::vector<double> z_sq_mean;  ///< ensemble mean of |Z_k|^2
  double xi_sq_mean = 0.0;        ///< ensemble mean of |xi|^2

  /// Closed form e^{(T-t)A^T} xi at each grid time (deterministic terminals).
  std::optional<std::vector<Vector>> exact_y;

  /// Per-path values at stored steps (empty unless requested).
  std::vector<int> stored_steps;
  std::vector<double> Y;  ///< [path][stored][n]
  std::vector<double> Z;  ///< [path][stored][n]

  Eigen::Map<const Vector> y_at(std::int64_t path, std::size_t stored) const {
    return Eigen::Map<const Vector>(Y.data() + (path * static_cast<std::int64_t>(stored_steps.size()) +
                                                static_cast<std::int64_t>(stored)) * n, n);
  }
  Eigen::Map<const Vector> z_at(std::int64_t path, std::size_t stored) const {
    return Eigen::Map<const Vector>(Z.data() + (path * static_cast<std::int64_t>(stored_steps.size()) +
                                                static_cast<std::int64_t>(stored)) * n, n);
  }
};

struct BsdeOptions {
  /// Materialize per-path Y and Z every store_stride steps; -1 disables.
  int store_stride = -1;
};

BsdeSolution solve_dual_bsde(const StochasticSystem& sys, const TerminalSpec& terminal, const SimConfig& cfg,
                             const BsdeOptions& options = {});

/// Probabilists' Hermite polynomials He_0..He_degree at x.
void hermite_basis(double x, int degree, double* out);

struct DualityReport {
  double lhs = 0.0;     ///< E <X_T, Y_T>
  double rhs = 0.0;     ///< <x, E Y_0> + E int <B u_s, Y_s> ds
  double std_error = 0.0; ///< combined Monte Carlo standard error
  double bias_allowance = 0.0;
  double tolerance = 0.0;  ///< 3 stderr + dt * bias_allowance
  bool pass = false;
  bool experimental = false;  ///< feedback controls
};

DualityReport duality_check(const StochasticSystem& sys, const Vector& x0, const ControlSpec& control,
                            const TerminalSpec& terminal, const SimConfig& cfg);

struct GirsanovRow {
  double dt;
  double sup_error;   ///< ensemble mean of max_t |E(lambda W)_t X_t - Xtilde_t|
  double std_error;
};

struct GirsanovReport {
  double lambda = 0.0;
  std::vector<GirsanovRow> rows;
  std::optional<double> fitted_order;  ///< slope of log error vs log dt; absent if any error is 0
  bool monotone = false;
};

GirsanovReport girsanov_check(const StochasticSystem& sys, double lambda, const Vector& x0,
                              const ControlSpec& control, const SimConfig& cfg, const std::vector<double>& dt_list);

struct AprioriSample {
  double xi_norm = 0.0;       ///< sqrt(E|xi|^2), analytic
  double sup_y_sq = 0.0;      ///< sup_t mean |Y_t|^2
  double int_z_sq = 0.0;      ///< mean int |Z|^2 dt
  double xi_sq_mean = 0.0;    ///< ensemble mean |xi|^2
  double ratio = 0.0;
  std::optional<double> exact_ratio;  ///< closed-form branch, deterministic terminals
  int shape_group = 0;
};

struct AprioriReport {
  double k_hat = 0.0;
  std::vector<AprioriSample> samples;
  double max_spread = 1.0;     ///< max over shape groups of max ratio / min ratio
  bool scale_invariant = true; ///< max_spread <= 1.5
};

AprioriReport apriori_bound_check(const StochasticSystem& sys, const std::vector<TerminalSpec>& terminals,
                                  const SimConfig& cfg);

struct ConvergenceOptions {
  double lambda = 1.0;
  bool run_bsde = true;
};

struct SemigroupRow {
  double nres;
  double delta;
  double err_n;      ///< sup_t |e^{t(A_n + lambda J^T E^T C E J)}x - e^{t(A + lambda E^T C E)}x|
  double err_delta;  ///< sup_t |e^{t(A + lambda E^T C E)}x - e^{t(A + lambda C)}x|
  double err_total;  ///< sup_t |e^{t(A_n + lambda J^T E^T C E J)}x - e^{t(A + lambda C)}x|
};

struct BsdeConvergenceRow {
  double nres;
  double delta;
  double sup_mean_sq;  ///< sup_t mean |Y^{n,delta}_t - Y_t|^2
};

struct ConvergenceTable {
  double lambda = 1.0;
  std::vector<SemigroupRow> semigroup;
  std::vector<BsdeConvergenceRow> bsde;
  bool n_monotone = false;       ///< err_n strictly decreasing in n for every delta
  bool delta_monotone = false;   ///< err_delta strictly decreasing as delta shrinks, for every n
  bool bsde_n_monotone = false;
  bool bsde_delta_monotone = false;
};

/// E_delta = e^{delta A}, (J_n, A_n) the Yosida pair. n_list must increase
/// strictly and delta_list decrease strictly.
ConvergenceTable approximation_convergence(const StochasticSystem& sys, const TerminalSpec& terminal,
                                           const SimConfig& cfg, const std::vector<double>& n_list,
                                           const std::vector<double>& delta_list,
                                           const ConvergenceOptions& options = {});

/// Serial reference implementations kept for cross-checking and
/// benchmarking the parallel kernels. They materialize every intermediate
/// array and use dense least squares instead of normal equations.
namespace reference {

PathEnsemble simulate_forward(const StochasticSystem& sys, const Vector& x0, const ControlSpec& control,
                              const SimConfig& cfg);

BsdeSolution solve_dual_bsde(const StochasticSystem& sys, const TerminalSpec& terminal, const SimConfig& cfg);

}  // namespace reference

}  // namespace sck
