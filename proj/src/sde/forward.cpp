#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sck {

void SimConfig::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("sim.T must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("sim.dt must be positive");
  if (dt > T) throw DomainError("sim.dt must not exceed sim.T");
  const double ratio = T / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-12 * std::max(1.0, rounded))
    throw DomainError("sim.T / sim.dt must be an integer");
  if (rounded > 1e8) throw DomainError("sim.T / sim.dt exceeds 1e8 steps");
  if (n_paths < 2) throw DomainError("sim.n_paths must be >= 2");
  if (regression_degree < 0 || regression_degree > 6) throw DomainError("sim.regression_degree must be in [0, 6]");
  if (threads < 0) throw DomainError("threads must be >= 0");
}

int SimConfig::steps() const { return static_cast<int>(std::round(T / dt)); }

ControlSpec ControlSpec::zero(int m) {
  if (m < 1) throw DimensionError("control dimension must be positive");
  ControlSpec c;
  c.kind_ = Kind::Zero;
  c.value_ = Vector::Zero(m);
  return c;
}

ControlSpec ControlSpec::constant(Vector u) {
  require_finite(u, "control value");
  ControlSpec c;
  c.kind_ = Kind::Constant;
  c.value_ = std::move(u);
  return c;
}

ControlSpec ControlSpec::piecewise_constant(Matrix values) {
  require_finite(values, "control values");
  ControlSpec c;
  c.kind_ = Kind::PiecewiseConstant;
  c.matrix_ = std::move(values);
  return c;
}

ControlSpec ControlSpec::feedback(Matrix K) {
  require_finite(K, "feedback gain");
  ControlSpec c;
  c.kind_ = Kind::Feedback;
  c.matrix_ = std::move(K);
  return c;
}

int ControlSpec::m() const {
  switch (kind_) {
    case Kind::Zero:
    case Kind::Constant:
      return static_cast<int>(value_.size());
    case Kind::PiecewiseConstant:
    case Kind::Feedback:
      return static_cast<int>(matrix_.rows());
  }
  return 0;
}

void ControlSpec::evaluate(int k, const double* x, int n, double* u) const {
  const int mm = m();
  switch (kind_) {
    case Kind::Zero:
      std::fill(u, u + mm, 0.0);
      return;
    case Kind::Constant:
      std::copy(value_.data(), value_.data() + mm, u);
      return;
    case Kind::PiecewiseConstant:
      for (int i = 0; i < mm; ++i) u[i] = matrix_(i, k);
      return;
    case Kind::Feedback:
      for (int i = 0; i < mm; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += matrix_(i, j) * x[j];
        u[i] = acc;
      }
      return;
  }
}

void ControlSpec::check(const StochasticSystem& sys, const SimConfig& cfg) const {
  if (m() != sys.m())
    throw DimensionError("control has " + std::to_string(m()) + " components, system expects " +
                         std::to_string(sys.m()));
  if (kind_ == Kind::PiecewiseConstant && matrix_.cols() != cfg.steps())
    throw DimensionError("piecewise-constant control needs one column per step (" + std::to_string(cfg.steps()) +
                         ")");
  if (kind_ == Kind::Feedback && matrix_.cols() != sys.n())
    throw DimensionError("feedback gain must have n columns");
}

TerminalSpec TerminalSpec::deterministic(Vector xi) {
  TerminalSpec t;
  t.kind = Kind::Deterministic;
  t.xi1 = Vector::Zero(xi.size());
  t.xi0 = std::move(xi);
  return t;
}

TerminalSpec TerminalSpec::linear_in_wt(Vector xi0, Vector xi1) {
  TerminalSpec t;
  t.kind = Kind::LinearInWT;
  t.xi0 = std::move(xi0);
  t.xi1 = std::move(xi1);
  return t;
}

double TerminalSpec::mean_square(double T) const {
  const double lin = kind == Kind::LinearInWT ? xi1.squaredNorm() * T : 0.0;
  return xi0.squaredNorm() + lin;
}

void TerminalSpec::check(int n) const {
  if (xi0.size() != n) throw DimensionError("terminal xi0 must have n entries");
  require_finite(xi0, "terminal xi0");
  if (kind == Kind::LinearInWT) {
    if (xi1.size() != n) throw DimensionError("terminal xi1 must have n entries");
    require_finite(xi1, "terminal xi1");
  }
}

namespace detail {

std::vector<int> stored_steps(int steps, int stride) {
  std::vector<int> out;
  if (stride <= 0) {
    out = {0, steps};
    return out;
  }
  for (int k = 0; k < steps; k += stride) out.push_back(k);
  out.push_back(steps);
  return out;
}

}  // namespace detail

PathEnsemble simulate_forward(const StochasticSystem& sys, const Vector& x0, const ControlSpec& control,
                              const SimConfig& cfg, const StorageOptions& storage) {
  cfg.validate();
  control.check(sys, cfg);
  if (x0.size() != sys.n()) throw DimensionError("x0 must have n entries");
  require_finite(x0, "x0");

  const int n = sys.n();
  const int m = sys.m();
  const int N = cfg.steps();
  const double dt = cfg.step_size();
  const double sqrt_dt = std::sqrt(dt);
  const std::int64_t P = cfg.n_paths;

  PathEnsemble ens;
  ens.n = n;
  ens.n_paths = P;
  ens.steps = N;
  ens.stored_steps = detail::stored_steps(N, storage.store_stride);
  for (int k : ens.stored_steps) ens.times.push_back(cfg.time(k));
  const auto S = static_cast<std::int64_t>(ens.stored_steps.size());
  ens.states.resize(static_cast<std::size_t>(P * S * n));
  if (storage.keep_increments) ens.increments.resize(static_cast<std::size_t>(P) * N);

  const detail::EulerStepper stepper(sys.A(), sys.B(), sys.C());
  parallel_for(P, resolve_threads(cfg.threads), [&](std::int64_t p) {
    std::vector<double> x(x0.data(), x0.data() + n), next(n), u(m);
    double* out = ens.states.data() + p * S * n;
    std::size_t slot = 0;
    std::copy(x.begin(), x.end(), out);
    ++slot;
    for (int k = 0; k < N; ++k) {
      const double dW = detail::increment(cfg.seed, p, k, sqrt_dt);
      if (storage.keep_increments) ens.increments[static_cast<std::size_t>(p) * N + k] = dW;
      control.evaluate(k, x.data(), n, u.data());
      stepper.step(x.data(), u.data(), dt, dW, next.data());
      detail::check_finite_state(next.data(), n, p, k + 1);
      std::swap(x, next);
      if (slot < ens.stored_steps.size() && ens.stored_steps[slot] == k + 1) {
        std::copy(x.begin(), x.end(), out + slot * n);
        ++slot;
      }
    }
  });
  return ens;
}

FlowEnsemble simulate_flow(const StochasticSystem& sys, const SimConfig& cfg, const StorageOptions& storage) {
  cfg.validate();
  const int n = sys.n();
  const int N = cfg.steps();
  const double dt = cfg.step_size();
  const double sqrt_dt = std::sqrt(dt);
  const std::int64_t P = cfg.n_paths;

  FlowEnsemble ens;
  ens.n = n;
  ens.n_paths = P;
  ens.steps = N;
  ens.stored_steps = detail::stored_steps(N, storage.store_stride);
  for (int k : ens.stored_steps) ens.times.push_back(cfg.time(k));
  const auto S = static_cast<std::int64_t>(ens.stored_steps.size());
  const auto block = static_cast<std::int64_t>(n) * n;
  ens.flows.resize(static_cast<std::size_t>(P * S * block));

  const detail::EulerStepper stepper(sys.A(), sys.B(), sys.C());
  parallel_for(P, resolve_threads(cfg.threads), [&](std::int64_t p) {
    std::vector<double> phi(static_cast<std::size_t>(block), 0.0), next(static_cast<std::size_t>(block));
    for (int i = 0; i < n; ++i) phi[static_cast<std::size_t>(i) * n + i] = 1.0;
    double* out = ens.flows.data() + p * S * block;
    std::copy(phi.begin(), phi.end(), out);
    std::size_t slot = 1;
    for (int k = 0; k < N; ++k) {
      const double dW = detail::increment(cfg.seed, p, k, sqrt_dt);
      for (int j = 0; j < n; ++j) {
        stepper.step(phi.data() + j * n, nullptr, dt, dW, next.data() + j * n);
        detail::check_finite_state(next.data() + j * n, n, p, k + 1);
      }
      std::swap(phi, next);
      if (slot < ens.stored_steps.size() && ens.stored_steps[slot] == k + 1) {
        std::copy(phi.begin(), phi.end(), out + slot * block);
        ++slot;
      }
    }
  });
  return ens;
}

}  // namespace sck
