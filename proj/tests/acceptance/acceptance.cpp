// Acceptance suite: one PASS/FAIL line per criterion, with wall-clock time
// checked against each criterion's budget. Exits non-zero if any fails.

#include "sck/cli/run.hpp"
#include "sck/controllability.hpp"
#include "sck/galerkin.hpp"
#include "sck/sde.hpp"
#include "invariant_oracle.hpp"

#include <Eigen/Eigenvalues>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace sck;
using sck::testing::kPi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Vector& b_example() {
  static const Vector b = [] {
    Vector v(4);
    v << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0.1, 0.1;
    return v;
  }();
  return b;
}

StochasticSystem example2() { return assemble_example2(4, b_example()); }

Vector zeta() {
  Vector z = Vector::Zero(4);
  z(0) = -b_example()(1) / b_example()(0);
  z(1) = 1.0;
  return z;
}

double angle(Vector a, Vector b) {
  a.normalize();
  b.normalize();
  return std::acos(std::min(1.0, std::abs(a.dot(b))));
}

Outcome c1_counterexample() {
  Outcome o;
  const auto sys = example2();
  const double lambda = -3 * kPi * kPi, alpha = -4 * kPi * kPi;
  HautusOptions opts;
  opts.explicit_points = {{lambda, alpha}};
  const auto r = check_condition(sys, {lambda}, Condition::N2, {}, opts);
  double sigma = 1.0;
  for (const auto& p : r.points)
    if (p.source == HautusPoint::Source::Explicit) sigma = p.sigma_min;
  o.require(sigma <= 1e-8, "sigma_min " + fmt("%.3g", sigma));
  o.require(r.witness.has_value(), "no witness");
  if (r.witness) {
    const double a = angle(*r.witness, zeta());
    o.require(a <= 1e-6, "witness angle " + fmt("%.3g", a));
  }
  const Vector z = zeta();
  const Matrix op = sys.A().transpose() + lambda * sys.C().transpose() - alpha * Matrix::Identity(4, 4);
  const double res = (op * z).norm() + (sys.B().transpose() * z).norm();
  o.require(res <= 1e-10 * z.norm(), "residual " + fmt("%.3g", res));
  o.detail = o.detail.empty() ? "sigma_min " + fmt("%.2e", sigma) + ", residual " + fmt("%.2e", res) : o.detail;
  return o;
}

Outcome c2_n1() {
  Outcome o;
  const auto r = check_condition(example2(), {}, Condition::N1);
  o.require(r.violation_count() == 0, std::to_string(r.violation_count()) + " violations");
  o.require(r.min_sigma() >= 1e-3, "min sigma " + fmt("%.3g", r.min_sigma()));
  if (o.pass) o.detail = "min sigma_min " + fmt("%.4g", r.min_sigma());
  return o;
}

Outcome c3_invariant_subspace() {
  Outcome o;
  ToleranceConfig tol;
  const auto sys = example2();
  const auto V = strict_invariant_subspace(sys.A(), sys.C(), sys.B(), tol);
  o.require(V.dim() >= 1, "example dim 0");
  const double d = V.distance(zeta().normalized());
  o.require(d <= tol.rank_tol, "zeta distance " + fmt("%.3g", d));

  std::mt19937_64 rng(2024);
  int agreed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const int dim = trial % 3 == 0 ? 0 : std::min(1 + (trial / 3) % (n - 1), n - 1);
    const auto s = sck::testing::planted_system(rng, n, 1, dim);
    const auto W = strict_invariant_subspace(s.A, s.C, s.B, tol);
    std::vector<Matrix> planted;
    if (s.V.cols() > 0) planted.push_back(s.V);
    const auto oracle = sck::testing::brute_force_invariant(s.A, s.C, s.B, planted, 100 + trial);
    bool ok = sck::testing::strict_invariance_residual(s.A, s.C, s.B, W.basis()) <= 10 * tol.rank_tol;
    ok = ok && oracle.max_candidate_dim <= W.dim();
    for (int j = 0; j < oracle.union_basis.cols(); ++j) ok = ok && W.distance(oracle.union_basis.col(j)) <= 1e-7;
    agreed += ok;
  }
  o.require(agreed == 20, std::to_string(agreed) + "/20 oracle agreements");
  if (o.pass) o.detail = "example dim " + std::to_string(V.dim()) + ", 20/20 oracle agreements";
  return o;
}

Outcome c4_duality() {
  Outcome o;
  SimConfig cfg;
  cfg.T = 1.0;
  cfg.dt = 1e-3;
  cfg.n_paths = 100000;
  cfg.seed = 42;
  cfg.threads = 0;
  const auto rep = duality_check(example2(), Vector::Ones(4), ControlSpec::constant(Vector::Ones(1)),
                                 TerminalSpec::deterministic(Vector::Unit(4, 1)), cfg);
  o.require(rep.pass, "example |lhs-rhs| " + fmt("%.3g", std::abs(rep.lhs - rep.rhs)) + " > tol " +
                          fmt("%.3g", rep.tolerance));
  std::mt19937_64 rng(4);
  int passed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    const auto sys = StochasticSystem(sck::testing::random_dissipative(rng, n), sck::testing::random_matrix(rng, n, 1),
                                      0.5 * sck::testing::random_matrix(rng, n, n), Matrix::Zero(n, n));
    const Vector x0 = sck::testing::random_matrix(rng, n, 1);
    const auto control = ControlSpec::constant(sck::testing::random_matrix(rng, 1, 1));
    const auto terminal = trial % 2 ? TerminalSpec::deterministic(sck::testing::random_matrix(rng, n, 1))
                                    : TerminalSpec::linear_in_wt(sck::testing::random_matrix(rng, n, 1),
                                                                 sck::testing::random_matrix(rng, n, 1));
    SimConfig c = cfg;
    c.dt = 1e-2;
    c.n_paths = 20000;
    c.seed = 500 + trial;
    passed += duality_check(sys, x0, control, terminal, c).pass;
  }
  o.require(passed == 20, std::to_string(passed) + "/20 random systems");
  if (o.pass)
    o.detail = "example |lhs-rhs| " + fmt("%.2e", std::abs(rep.lhs - rep.rhs)) + " <= " + fmt("%.2e", rep.tolerance) +
               ", 20/20 random systems";
  return o;
}

Outcome c5_deterministic_bsde() {
  Outcome o;
  const auto sys = example2();
  Vector xi(4);
  xi << 1.0, 1.0, 0.5, 0.25;
  SimConfig cfg;
  cfg.T = 1.0;
  cfg.dt = 1e-3;
  cfg.n_paths = 10000;
  cfg.seed = 5;
  cfg.threads = 0;
  const auto sol = solve_dual_bsde(sys, TerminalSpec::deterministic(xi), cfg);
  // A is diagonal with entries -k^2 pi^2.
  double y_err = 0.0, z_rms = 0.0;
  for (int k = 0; k <= sol.steps; ++k) {
    const double tau = cfg.T - cfg.time(k);
    Vector exact(4);
    for (int i = 0; i < 4; ++i) exact(i) = std::exp(-(i + 1.0) * (i + 1.0) * kPi * kPi * tau) * xi(i);
    y_err = std::max(y_err, (sol.y_mean[k] - exact).norm());
    z_rms = std::max(z_rms, std::sqrt(sol.z_sq_mean[k]));
  }
  const double y_bound = 20 * cfg.dt * xi.norm() * std::exp(norm2(sys.A()) * cfg.T);
  const double z_bound = 5 * (std::sqrt(cfg.dt) + 1 / std::sqrt(static_cast<double>(cfg.n_paths))) * xi.norm();
  o.require(y_err <= y_bound, "Y error " + fmt("%.3g", y_err));
  o.require(z_rms <= z_bound, "Z rms " + fmt("%.3g", z_rms));
  // Y is the mean over paths, so it should be close to the Euler value without
  // needing the exponential factor in the bound.
  o.require(y_err <= 20 * cfg.dt * xi.norm(), "Y error above 20 dt |xi|: " + fmt("%.3g", y_err));
  if (o.pass) o.detail = "max Y error " + fmt("%.2e", y_err) + ", max Z rms " + fmt("%.2e", z_rms);
  return o;
}

Outcome c6_girsanov() {
  Outcome o;
  const auto sys = example2();
  SimConfig cfg;
  cfg.T = 1.0;
  cfg.n_paths = 2000;
  cfg.seed = 6;
  cfg.threads = 0;
  const std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3};
  const auto control = ControlSpec::constant(Vector::Ones(1));
  const auto zero = girsanov_check(sys, 0.0, Vector::Ones(4), control, cfg, dts);
  for (const auto& r : zero.rows) o.require(r.sup_error == 0.0, "lambda=0 error " + fmt("%.3g", r.sup_error));
  const auto rep = girsanov_check(sys, -1.0, Vector::Ones(4), control, cfg, dts);
  o.require(rep.monotone, "errors not strictly decreasing");
  const double order = rep.fitted_order.value_or(0.0);
  o.require(rep.fitted_order.has_value() && order >= 0.4, "fitted order " + fmt("%.3g", order));
  if (o.pass) o.detail = "lambda=0 exact, lambda=-1 fitted order " + fmt("%.3f", order);
  return o;
}

Outcome c7_convergence() {
  Outcome o;
  std::mt19937_64 rng(7);
  const Matrix A = sck::testing::random_dissipative(rng, 4);
  const Matrix C = 0.5 * sck::testing::random_matrix(rng, 4, 4);
  SimConfig cfg;
  cfg.T = 1.0;
  cfg.dt = 1e-2;
  cfg.n_paths = 1000;
  cfg.seed = 7;
  ConvergenceOptions opt;
  opt.run_bsde = false;
  const std::vector<double> ns{10, 100, 1000}, ds{1e-1, 1e-2, 1e-4};
  const auto terminal = TerminalSpec::deterministic(Vector::Ones(4));
  const auto t = approximation_convergence(StochasticSystem::with_noise(A, Matrix::Ones(4, 1), C), terminal, cfg, ns, ds, opt);
  // Rows are indexed n_index * 3 + delta_index.
  auto decreasing = [](double a, double b, double c) { return b < a && c < b; };
  const auto& s = t.semigroup;
  o.require(decreasing(s[1].err_n, s[4].err_n, s[7].err_n), "err_n along n at delta=1e-2");
  o.require(decreasing(s[1].err_total, s[4].err_total, s[7].err_total), "err_total along n at delta=1e-2");
  o.require(decreasing(s[6].err_delta, s[7].err_delta, s[8].err_delta), "err_delta along delta at n=1000");
  o.require(decreasing(s[6].err_total, s[7].err_total, s[8].err_total), "err_total along delta at n=1000");

  const auto z = approximation_convergence(StochasticSystem::with_noise(Matrix::Zero(4, 4), Matrix::Ones(4, 1), C),
                                           terminal, cfg, ns, ds, opt);
  for (const auto& r : z.semigroup)
    o.require(r.err_n == 0.0 && r.err_delta == 0.0 && r.err_total == 0.0, "A = 0 error not zero");
  if (o.pass)
    o.detail = "err_total along n " + fmt("%.2e", s[1].err_total) + " > " + fmt("%.2e", s[4].err_total) + " > " +
               fmt("%.2e", s[7].err_total) + ", along delta " + fmt("%.2e", s[6].err_total) + " > " +
               fmt("%.2e", s[7].err_total) + " > " + fmt("%.2e", s[8].err_total);
  return o;
}

Outcome c8_galerkin() {
  Outcome o;
  HeatSystemSpec spec;
  spec.N = 8;
  const auto s = assemble_divform_1d(spec);
  Matrix diag = Matrix::Zero(8, 8);
  for (int k = 1; k <= 8; ++k) diag(k - 1, k - 1) = -static_cast<double>(k * k) * kPi * kPi;
  const double e1 = (s.A() - diag).cwiseAbs().maxCoeff();
  o.require(e1 <= 1e-9, "diagonal error " + fmt("%.3g", e1));

  spec.c = CoefficientFn::constant(0.8);
  const auto sc = assemble_divform_1d(spec);
  const double e2 = (sc.C() + sc.C().transpose()).cwiseAbs().maxCoeff();
  o.require(e2 <= 1e-9, "skew error " + fmt("%.3g", e2));

  HeatSystemSpec var;
  var.N = 8;
  var.quad_order = 32;
  var.a = CoefficientFn::trigonometric({1.5, 0.4}, {0.3});
  var.c = CoefficientFn::polynomial({0.2, 0.5, -0.3});
  var.b = CoefficientFn::polynomial({1.0, -1.0});
  HeatSystemSpec big = var;
  big.N = 16;
  const auto sn = assemble_divform_1d(var);
  const auto s2n = assemble_divform_1d(big);
  const double e3 = std::max({(s2n.A().topLeftCorner(8, 8) - sn.A()).cwiseAbs().maxCoeff(),
                              (s2n.C().topLeftCorner(8, 8) - sn.C()).cwiseAbs().maxCoeff(),
                              (s2n.B().topRows(8) - sn.B()).cwiseAbs().maxCoeff()});
  o.require(e3 <= 1e-9, "nesting error " + fmt("%.3g", e3));
  if (o.pass) o.detail = "errors " + fmt("%.1e", e1) + ", " + fmt("%.1e", e2) + ", " + fmt("%.1e", e3);
  return o;
}

Outcome c9_lambda_set() {
  Outcome o;
  ToleranceConfig tol;
  std::mt19937_64 rng(9);
  int hypothesis = 0, accepted = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    const Matrix A = sck::testing::random_dissipative(rng, n, 0.5);
    const Matrix C1 = 0.6 * sck::testing::random_matrix(rng, n, n);
    const StochasticSystem sys(A, Matrix::Ones(n, 1), C1, sck::testing::random_matrix(rng, n, n));
    // Hypothesis at lambda = 0: sym(A) + a C1^T C1 negative semidefinite with a = 1/2 + eps_a.
    const Matrix M = 0.5 * (A + A.transpose()) + (0.5 + tol.eps_a) * C1.transpose() * C1;
    if (Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().maxCoeff() > -tol.psd_tol) continue;
    ++hypothesis;
    accepted += lambda_set(sys, {0.0}, tol)[0].in_set;
  }
  o.require(hypothesis >= 10, "only " + std::to_string(hypothesis) + " corpus systems satisfy the hypothesis");
  o.require(accepted == hypothesis, std::to_string(accepted) + "/" + std::to_string(hypothesis) + " contain 0");

  std::vector<double> grid;
  for (int i = -20; i <= 20; ++i) grid.push_back(0.5 * i);
  int bounded_ok = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 4;
    const auto sys = StochasticSystem::with_bounded_noise(sck::testing::random_dissipative(rng, n),
                                                         Matrix::Ones(n, 1), 3.0 * sck::testing::random_matrix(rng, n, n));
    bool all = true;
    for (const auto& p : lambda_set(sys, grid, tol)) all = all && p.in_set;
    bounded_ok += all;
  }
  o.require(bounded_ok == 10, std::to_string(bounded_ok) + "/10 C1 = 0 systems accept the grid");
  if (o.pass) o.detail = std::to_string(accepted) + "/" + std::to_string(hypothesis) + " contain 0, 10/10 C1 = 0 accept the grid";
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c10_reproducibility() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("sck_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
    "system": {"example2": {"N": 4, "b_coeffs": [0.7071067811865476, 0.7071067811865476, 0.1, 0.1]}},
    "sim": {"T": 1, "dt": 0.005, "n_paths": 4000, "seed": 10, "regression_degree": 2},
    "x0": [1, 1, 1, 1],
    "control": {"type": "constant", "value": [1]},
    "terminal": {"xi0": [0, 1, 0, 0], "xi1": [0.5, 0, 0, 0]},
    "girsanov": {"lambda": -1, "dt_list": [0.01, 0.005]},
    "apriori": {"terminals": [{"xi": [1, 0, 0, 0]}, {"xi": [2, 0, 0, 0]}, {"xi0": [0, 1, 0, 0], "xi1": [1, 0, 0, 0]},
                              {"xi0": [0, 2, 0, 0], "xi1": [2, 0, 0, 0]}, {"xi": [0, 0, 3, 0]}]},
    "convergence": {"n_list": [10, 100], "delta_list": [0.1, 0.01], "lambda": 1}
  })";
  int identical = 0, total = 0;
  for (const char* sub : {"simulate-forward", "duality", "girsanov", "apriori", "convergence"}) {
    std::string payload[2];
    bool ran = true;
    int idx = 0;
    for (int threads : {1, 4}) {
      const fs::path out = dir / (std::string(sub) + "_" + std::to_string(threads) + ".json");
      const std::string cmd = std::string(SCK_CLI_PATH) + " " + sub + " --config " + cfg.string() + " --output " +
                              out.string() + " --threads " + std::to_string(threads);
      const int status = std::system(cmd.c_str());
      ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
      if (ran) payload[idx] = sck::cli::json::parse(read_file(out))["payload"].dump();
      ++idx;
    }
    ++total;
    o.require(ran, std::string(sub) + " failed to run");
    const bool same = ran && payload[0] == payload[1];
    o.require(same, std::string(sub) + " payload differs");
    identical += same;
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(identical) + "/" + std::to_string(total) + " subcommands byte-identical at 1 and 4 threads";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "Example 2 counterexample", 1.0, c1_counterexample},
      {2, "Example 2 N1 positive case", 1.0, c2_n1},
      {3, "invariant-subspace consistency", 10.0, c3_invariant_subspace},
      {4, "duality identity", 300.0, c4_duality},
      {5, "deterministic-terminal BSDE", 60.0, c5_deterministic_bsde},
      {6, "Girsanov equivalence", 120.0, c6_girsanov},
      {7, "approximation convergence", 30.0, c7_convergence},
      {8, "Galerkin correctness", 5.0, c8_galerkin},
      {9, "Lambda set", 5.0, c9_lambda_set},
      {10, "reproducibility across thread counts", 60.0, c10_reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s > c.budget_s) o.require(false, "runtime " + fmt("%.2f", s) + " s over budget " + fmt("%.0f", c.budget_s) + " s");
    failed += !o.pass;
    std::printf("%s criterion %2d: %-38s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, s, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
