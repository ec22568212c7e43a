#include "sck/errors.hpp"
#include "sck/galerkin.hpp"
#include "sck/rng.hpp"
#include "sck/sde.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace sck;

namespace {

SimConfig config(double T, double dt, std::int64_t paths, int degree = 2) {
  SimConfig cfg;
  cfg.T = T;
  cfg.dt = dt;
  cfg.n_paths = paths;
  cfg.seed = 42;
  cfg.regression_degree = degree;
  return cfg;
}

StochasticSystem example2() {
  Vector b(4);
  b << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0.1, 0.1;
  return assemble_example2(4, b);
}

}  // namespace

TEST_CASE("duality sides against independent forward and backward runs") {
  const auto sys = example2();
  const auto cfg = config(1.0, 1e-2, 5000);
  const Vector x0 = Vector::Ones(4);
  const Vector xi = Vector::Unit(4, 1);
  const auto control = ControlSpec::constant(Vector::Ones(1));
  const auto rep = duality_check(sys, x0, control, TerminalSpec::deterministic(xi), cfg);

  const auto ens = simulate_forward(sys, x0, control, cfg, {0, false});
  double lhs = 0.0;
  for (std::int64_t p = 0; p < cfg.n_paths; ++p) lhs += ens.state(p, 1).dot(xi);
  lhs /= cfg.n_paths;
  CHECK(rep.lhs == doctest::Approx(lhs).epsilon(1e-12));

  // With a deterministic terminal every path carries the same Y_k.
  const auto sol = solve_dual_bsde(sys, TerminalSpec::deterministic(xi), cfg);
  const Vector Bu = sys.B() * Vector::Ones(1);
  double rhs = x0.dot(sol.y_mean[0]);
  for (int k = 0; k < sol.steps; ++k) rhs += 0.5 * cfg.step_size() * (Bu.dot(sol.y_mean[k]) + Bu.dot(sol.y_mean[k + 1]));
  CHECK(rep.rhs == doctest::Approx(rhs).epsilon(1e-12));
  CHECK(rep.pass);
  CHECK_FALSE(rep.experimental);
  CHECK(rep.tolerance == doctest::Approx(3 * rep.std_error + cfg.step_size() * rep.bias_allowance));
}

TEST_CASE("duality holds on a random corpus") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 4;
    const auto sys = StochasticSystem(sck::testing::random_dissipative(rng, n),
                                      sck::testing::random_matrix(rng, n, 1 + trial % 2),
                                      0.5 * sck::testing::random_matrix(rng, n, n), Matrix::Zero(n, n));
    const Vector x0 = sck::testing::random_matrix(rng, n, 1);
    const auto control = ControlSpec::constant(sck::testing::random_matrix(rng, sys.m(), 1));
    const auto terminal = trial % 2 ? TerminalSpec::deterministic(sck::testing::random_matrix(rng, n, 1))
                                    : TerminalSpec::linear_in_wt(sck::testing::random_matrix(rng, n, 1),
                                                                 sck::testing::random_matrix(rng, n, 1));
    auto cfg = config(1.0, 1e-2, 4000);
    cfg.seed = 1000 + trial;
    const auto rep = duality_check(sys, x0, control, terminal, cfg);
    CHECK_MESSAGE(rep.pass, "trial " << trial << " lhs " << rep.lhs << " rhs " << rep.rhs << " tol " << rep.tolerance);
  }
}

TEST_CASE("feedback duality is flagged experimental") {
  const auto sys = example2();
  const auto rep = duality_check(sys, Vector::Ones(4), ControlSpec::feedback(Matrix::Constant(1, 4, -0.5)),
                                 TerminalSpec::deterministic(Vector::Unit(4, 0)), config(0.5, 1e-2, 2000));
  CHECK(rep.experimental);
  CHECK(std::isfinite(rep.lhs));
  CHECK(std::isfinite(rep.rhs));
}

TEST_CASE("duality is independent of the thread count") {
  const auto sys = example2();
  auto cfg = config(0.5, 1e-2, 999);
  const auto terminal = TerminalSpec::linear_in_wt(Vector::Ones(4), Vector::Unit(4, 0));
  cfg.threads = 1;
  const auto a = duality_check(sys, Vector::Ones(4), ControlSpec::constant(Vector::Ones(1)), terminal, cfg);
  cfg.threads = 4;
  const auto b = duality_check(sys, Vector::Ones(4), ControlSpec::constant(Vector::Ones(1)), terminal, cfg);
  CHECK(a.lhs == b.lhs);
  CHECK(a.rhs == b.rhs);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("girsanov check") {
  const auto sys = example2();
  const auto cfg = config(1.0, 1e-2, 400);
  const std::vector<double> dts{1e-2, 5e-3, 2.5e-3};
  SUBCASE("lambda = 0 is exact") {
    const auto rep = girsanov_check(sys, 0.0, Vector::Ones(4), ControlSpec::constant(Vector::Ones(1)), cfg, dts);
    REQUIRE(rep.rows.size() == 3);
    for (const auto& r : rep.rows) CHECK(r.sup_error == 0.0);
    CHECK_FALSE(rep.fitted_order.has_value());
    CHECK_FALSE(rep.monotone);
  }
  SUBCASE("lambda != 0 converges in dt") {
    const auto rep = girsanov_check(sys, -1.0, Vector::Ones(4), ControlSpec::constant(Vector::Ones(1)), cfg, dts);
    CHECK(rep.monotone);
    REQUIRE(rep.fitted_order.has_value());
    CHECK(*rep.fitted_order >= 0.4);
  }
  SUBCASE("scalar uncontrolled case against the exponential martingale") {
    // With B = 0 both equations are scalar products; compare one step directly.
    Matrix A(1, 1), C(1, 1);
    A << -1.0;
    C << 0.5;
    const auto s = StochasticSystem::with_noise(A, Matrix::Zero(1, 1), C);
    const auto rep = girsanov_check(s, 0.7, Vector::Ones(1), ControlSpec::zero(1), config(1.0, 0.5, 2), {1.0});
    REQUIRE(rep.rows.size() == 1);
    const double dW0 = std::sqrt(1.0) * rng::standard_normal(42, 0, 0);
    const double dW1 = std::sqrt(1.0) * rng::standard_normal(42, 1, 0);
    double mean = 0.0;
    for (double dW : {dW0, dW1}) {
      const double x = 1.0 + A(0, 0) + C(0, 0) * dW;
      const double xt = 1.0 + (A(0, 0) + 0.7 * C(0, 0)) + (C(0, 0) + 0.7) * dW;
      mean += std::abs(std::exp(0.7 * dW - 0.5 * 0.49) * x - xt) / 2.0;
    }
    CHECK(rep.rows[0].sup_error == doctest::Approx(mean).epsilon(1e-12));
  }
  SUBCASE("input checks") {
    CHECK_THROWS_AS(girsanov_check(sys, -1.0, Vector::Ones(4), ControlSpec::zero(1), cfg, {1e-2, 1e-2}),
                    DomainError);
    CHECK_THROWS_AS(girsanov_check(sys, -1.0, Vector::Ones(4),
                                   ControlSpec::piecewise_constant(Matrix::Ones(1, 100)), cfg, dts),
                    DomainError);
    CHECK_THROWS_AS(girsanov_check(sys, -1.0, Vector::Ones(3), ControlSpec::zero(1), cfg, dts), DimensionError);
  }
}

TEST_CASE("a-priori bound") {
  const auto sys = example2();
  const auto cfg = config(1.0, 1e-2, 2000);
  SUBCASE("scaled deterministic terminals share one ratio") {
    std::vector<TerminalSpec> terms;
    for (double s : {0.5, 1.0, 2.0, 4.0, 8.0}) terms.push_back(TerminalSpec::deterministic(s * Vector::Ones(4)));
    const auto rep = apriori_bound_check(sys, terms, cfg);
    REQUIRE(rep.samples.size() == 5);
    for (const auto& a : rep.samples) {
      CHECK(a.shape_group == 0);
      CHECK(a.ratio == doctest::Approx(rep.samples[0].ratio).epsilon(1e-12));
      REQUIRE(a.exact_ratio.has_value());
      // The semigroup of a symmetric negative generator is a contraction.
      CHECK(*a.exact_ratio == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(a.ratio <= rep.k_hat);
    }
    CHECK(rep.max_spread == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.scale_invariant);
  }
  SUBCASE("random terminals in two shape groups") {
    std::vector<TerminalSpec> terms;
    for (double s : {1.0, -2.0, 3.0})
      terms.push_back(TerminalSpec::linear_in_wt(s * Vector::Unit(4, 0), s * Vector::Unit(4, 1)));
    for (double s : {0.7, 1.9}) terms.push_back(TerminalSpec::deterministic(s * Vector::Unit(4, 2)));
    const auto rep = apriori_bound_check(sys, terms, cfg);
    CHECK(rep.samples[1].shape_group == 0);
    CHECK(rep.samples[2].shape_group == 0);
    CHECK(rep.samples[3].shape_group == 1);
    CHECK(rep.samples[0].xi_norm == doctest::Approx(std::sqrt(2.0)));
    CHECK(rep.scale_invariant);
  }
  SUBCASE("input checks") {
    std::vector<TerminalSpec> four(4, TerminalSpec::deterministic(Vector::Ones(4)));
    CHECK_THROWS_AS(apriori_bound_check(sys, four, cfg), DomainError);
    std::vector<TerminalSpec> same;
    for (double s : {1.0, 2.0, 3.0, 4.0, -4.0}) same.push_back(TerminalSpec::deterministic(s * Vector::Ones(4)));
    CHECK_THROWS_AS(apriori_bound_check(sys, same, cfg), DomainError);
  }
}

TEST_CASE("approximation convergence") {
  const auto cfg = config(1.0, 1e-2, 500);
  const std::vector<double> ns{10, 100, 1000};
  const std::vector<double> ds{1e-1, 1e-2, 1e-4};
  SUBCASE("zero drift gives exact approximations") {
    std::mt19937_64 rng(1);
    const auto sys = StochasticSystem::with_bounded_noise(Matrix::Zero(3, 3), Matrix::Ones(3, 1),
                                                         sck::testing::random_matrix(rng, 3, 3));
    const auto table = approximation_convergence(sys, TerminalSpec::deterministic(Vector::Ones(3)), cfg, ns, ds);
    REQUIRE(table.semigroup.size() == 9);
    for (const auto& r : table.semigroup) {
      CHECK(r.err_n == 0.0);
      CHECK(r.err_delta == 0.0);
      CHECK(r.err_total == 0.0);
    }
    for (const auto& r : table.bsde) CHECK(r.sup_mean_sq == 0.0);
  }
  SUBCASE("random dissipative system") {
    std::mt19937_64 rng(8);
    const auto sys = StochasticSystem::with_noise(sck::testing::random_dissipative(rng, 4), Matrix::Ones(4, 1),
                                                  0.5 * sck::testing::random_matrix(rng, 4, 4));
    ConvergenceOptions opt;
    opt.run_bsde = false;
    const auto table = approximation_convergence(sys, TerminalSpec::deterministic(Vector::Ones(4)), cfg, ns, ds, opt);
    CHECK(table.bsde.empty());
    CHECK(table.n_monotone);
    CHECK(table.delta_monotone);
    for (std::size_t i = 0; i < table.semigroup.size(); ++i) {
      const auto& r = table.semigroup[i];
      CHECK(r.nres == ns[i / 3]);
      CHECK(r.delta == ds[i % 3]);
      CHECK(r.err_total <= r.err_n + r.err_delta + 1e-12);
    }
  }
  SUBCASE("input checks") {
    const auto sys = example2();
    const auto t = TerminalSpec::deterministic(Vector::Ones(4));
    CHECK_THROWS_AS(approximation_convergence(sys, t, cfg, {100, 10}, ds), DomainError);
    CHECK_THROWS_AS(approximation_convergence(sys, t, cfg, ns, {1e-2, 1e-1}), DomainError);
    CHECK_THROWS_AS(approximation_convergence(sys, t, cfg, {}, ds), DomainError);
  }
}
