#include "sck/cli/run.hpp"

#include "sck/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace sck::cli {

namespace {

using Row = std::vector<std::string>;

std::string num(double x) { return format_double(x); }
std::string num(long long x) { return std::to_string(x); }
std::string flag(bool b) { return b ? "true" : "false"; }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

const SimConfig& need_sim(const RunConfig& cfg) {
  if (!cfg.sim) throw ConfigError("/sim", "missing required field for simulation subcommands");
  return *cfg.sim;
}

const Vector& need_x0(const RunConfig& cfg) {
  if (!cfg.x0) throw ConfigError("/x0", "missing required field");
  return *cfg.x0;
}

const TerminalSpec& need_terminal(const RunConfig& cfg) {
  if (!cfg.terminal) throw ConfigError("/terminal", "missing required field");
  return *cfg.terminal;
}

ControlSpec control_or_zero(const RunConfig& cfg) {
  return cfg.control ? *cfg.control : ControlSpec::zero(cfg.system.m());
}

std::string_view source_name(HautusPoint::Source s) {
  switch (s) {
    case HautusPoint::Source::Eigenvalue:
      return "eigenvalue";
    case HautusPoint::Source::Explicit:
      return "explicit";
    case HautusPoint::Source::Grid:
      return "grid";
  }
  return "";
}

json hautus_json(const HautusReport& r) {
  json points = json::array();
  for (const auto& p : r.points)
    points.push_back({{"lambda", p.lambda},
                      {"alpha", p.alpha},
                      {"alpha_imag", p.alpha_imag},
                      {"sigma_min", p.sigma_min},
                      {"violated", p.violated},
                      {"source", source_name(p.source)}});
  json out = {{"condition", to_string(r.condition)},
              {"passed", r.passed()},
              {"violation_count", r.violation_count()},
              {"complex_violation_count", r.complex_violation_count()},
              {"min_sigma", finite_or_null(r.min_sigma())},
              {"points", points}};
  out["witness"] = r.witness ? vector_json(*r.witness) : json(nullptr);
  out["witness_point"] = r.witness_point
                             ? json{{"lambda", r.witness_point->first}, {"alpha", r.witness_point->second}}
                             : json(nullptr);
  return out;
}

void hautus_csv(const HautusReport& r, Report& rep) {
  rep.csv_header = {"condition", "lambda", "alpha", "alpha_imag", "sigma_min", "violated", "source"};
  for (const auto& p : r.points)
    rep.csv_rows.push_back({std::string(to_string(r.condition)), num(p.lambda), num(p.alpha), num(p.alpha_imag),
                            num(p.sigma_min), flag(p.violated), std::string(source_name(p.source))});
}

json subspace_json(const SubspaceBasis& V) {
  json basis = json::array();
  for (int j = 0; j < V.dim(); ++j) basis.push_back(vector_json(V.basis().col(j)));
  return {{"dim", V.dim()}, {"ambient_dim", V.ambient_dim()}, {"basis", basis}};
}

void subspace_csv(const SubspaceBasis& V, Report& rep) {
  rep.csv_header = {"vector", "component", "value"};
  for (int j = 0; j < V.dim(); ++j)
    for (int i = 0; i < V.ambient_dim(); ++i)
      rep.csv_rows.push_back({num(static_cast<long long>(j)), num(static_cast<long long>(i)), num(V.basis()(i, j))});
}

void matrix_rows(const std::string& name, const Matrix& M, Report& rep) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k)
      rep.csv_rows.push_back({name, num(static_cast<long long>(i)), num(static_cast<long long>(k)), num(M(i, k))});
}

Report run_check(const RunConfig& cfg, Condition c) {
  const auto r = check_condition(cfg.system, c == Condition::N2 ? cfg.lambda_grid : std::vector<double>{}, c,
                                 cfg.tolerances, cfg.hautus);
  Report rep;
  rep.payload = hautus_json(r);
  hautus_csv(r, rep);
  return rep;
}

Report run_invariant_subspace(const RunConfig& cfg) {
  const auto& s = cfg.system;
  const auto V = strict_invariant_subspace(s.A(), s.C(), s.B(), cfg.tolerances);
  Report rep;
  rep.payload = subspace_json(V);
  subspace_csv(V, rep);
  return rep;
}

Report run_lambda_set(const RunConfig& cfg) {
  const auto pts = lambda_set(cfg.system, cfg.lambda_grid, cfg.tolerances);
  Report rep;
  json arr = json::array();
  rep.csv_header = {"lambda", "in_set", "margin", "boundary"};
  for (const auto& p : pts) {
    arr.push_back({{"lambda", p.lambda}, {"in_set", p.in_set}, {"margin", p.margin}, {"boundary", p.boundary}});
    rep.csv_rows.push_back({num(p.lambda), flag(p.in_set), num(p.margin), flag(p.boundary)});
  }
  rep.payload = {{"a", 0.5 + cfg.tolerances.eps_a}, {"points", arr}};
  return rep;
}

Report run_verdict(const RunConfig& cfg) {
  const auto v = verdict(cfg.system, cfg.lambda_grid, cfg.tolerances, cfg.verdict);
  Report rep;
  rep.payload = {{"verdict", to_string(v.verdict)},
                 {"invariant_subspace_dim", v.invariant_subspace_dim},
                 {"n1_passed", v.n1_passed},
                 {"n2_passed", v.n2_passed},
                 {"commuting_case", v.commuting_case ? json(*v.commuting_case) : json(nullptr)},
                 {"consistency_warning", v.consistency_warning},
                 {"skipped_lambdas", v.skipped_lambdas},
                 {"subspace", subspace_json(v.subspace)},
                 {"n1", hautus_json(v.n1)},
                 {"n2", hautus_json(v.n2)}};
  rep.csv_header = {"field", "value"};
  rep.csv_rows = {{"verdict", std::string(to_string(v.verdict))},
                  {"invariant_subspace_dim", num(static_cast<long long>(v.invariant_subspace_dim))},
                  {"n1_passed", flag(v.n1_passed)},
                  {"n2_passed", flag(v.n2_passed)},
                  {"commuting_case", v.commuting_case ? flag(*v.commuting_case) : "none"},
                  {"consistency_warning", flag(v.consistency_warning)},
                  {"n1_min_sigma", num(v.n1.min_sigma())},
                  {"n2_min_sigma", num(v.n2.min_sigma())},
                  {"n2_violation_count", num(static_cast<long long>(v.n2.violation_count()))}};
  return rep;
}

Report run_assemble(const RunConfig& cfg) {
  const auto& s = cfg.system;
  Report rep;
  rep.payload = {{"source", cfg.system_source}, {"n", s.n()},          {"m", s.m()},
                 {"A", matrix_json(s.A())},     {"B", matrix_json(s.B())}, {"C1", matrix_json(s.C1())},
                 {"C2", matrix_json(s.C2())},   {"gamma", s.gamma()}};
  rep.csv_header = {"matrix", "row", "col", "value"};
  matrix_rows("A", s.A(), rep);
  matrix_rows("B", s.B(), rep);
  matrix_rows("C1", s.C1(), rep);
  matrix_rows("C2", s.C2(), rep);
  return rep;
}

Report run_ellipticity(const RunConfig& cfg) {
  const auto r = check_ellipticity(cfg.ell_a, cfg.ell_c, cfg.ell_alpha, cfg.ell_grid, cfg.tolerances.psd_tol);
  Report rep;
  rep.payload = {{"ok", r.ok}, {"min_margin", r.min_margin}, {"alpha", cfg.ell_alpha}, {"grid_points", cfg.ell_grid}};
  rep.csv_header = {"ok", "min_margin", "alpha", "grid_points"};
  rep.csv_rows = {{flag(r.ok), num(r.min_margin), num(cfg.ell_alpha), num(static_cast<long long>(cfg.ell_grid))}};
  return rep;
}

Report run_b_coeffs(const RunConfig& cfg) {
  const auto r = b_coefficient_test(cfg.system, cfg.tolerances);
  Report rep;
  json coefs = json::array(), clusters = json::array();
  rep.csv_header = {"mode", "column", "eigenvalue", "coefficient", "near_zero"};
  for (const auto& c : r.coefficients) {
    coefs.push_back({{"mode", c.mode},
                     {"column", c.column},
                     {"eigenvalue", c.eigenvalue},
                     {"coefficient", c.coefficient},
                     {"near_zero", c.near_zero}});
    rep.csv_rows.push_back({num(static_cast<long long>(c.mode)), num(static_cast<long long>(c.column)),
                            num(c.eigenvalue), num(c.coefficient), flag(c.near_zero)});
  }
  for (const auto& c : r.clusters)
    clusters.push_back({{"first_mode", c.first_mode},
                        {"size", c.size},
                        {"eigenvalue", c.eigenvalue},
                        {"projection_rank", c.projection_rank},
                        {"deficient", c.deficient}});
  rep.payload = {{"coefficients", coefs}, {"clusters", clusters}, {"flagged_modes", r.flagged_modes}};
  return rep;
}

Report run_simulate_forward(const RunConfig& cfg) {
  const auto& sim = need_sim(cfg);
  StorageOptions storage;
  storage.store_stride = cfg.store_stride;
  storage.keep_increments = false;
  const auto ens = simulate_forward(cfg.system, need_x0(cfg), control_or_zero(cfg), sim, storage);
  const int n = ens.n;
  Report rep;
  rep.csv_header = {"t"};
  for (int i = 0; i < n; ++i) rep.csv_header.push_back("mean_" + std::to_string(i));
  rep.csv_header.push_back("mean_sq_norm");
  rep.csv_header.push_back("mean_sq_norm_std_error");
  json rows = json::array();
  for (std::size_t s = 0; s < ens.times.size(); ++s) {
    Vector mean = Vector::Zero(n);
    double sq = 0.0;
    for (std::int64_t p = 0; p < ens.n_paths; ++p) {
      const auto x = ens.state(p, s);
      mean += x;
      sq += x.squaredNorm();
    }
    const auto P = static_cast<double>(ens.n_paths);
    mean /= P;
    sq /= P;
    double var = 0.0;
    for (std::int64_t p = 0; p < ens.n_paths; ++p) {
      const double d = ens.state(p, s).squaredNorm() - sq;
      var += d * d;
    }
    const double se = std::sqrt(var / (P - 1.0) / P);
    rows.push_back({{"t", ens.times[s]}, {"mean", vector_json(mean)}, {"mean_sq_norm", sq}, {"mean_sq_norm_std_error", se}});
    Row r{num(ens.times[s])};
    for (int i = 0; i < n; ++i) r.push_back(num(mean(i)));
    r.push_back(num(sq));
    r.push_back(num(se));
    rep.csv_rows.push_back(std::move(r));
  }
  rep.payload = {{"n_paths", ens.n_paths}, {"steps", ens.steps}, {"stored", rows}};
  return rep;
}

Report run_duality(const RunConfig& cfg) {
  const auto r = duality_check(cfg.system, need_x0(cfg), control_or_zero(cfg), need_terminal(cfg), need_sim(cfg));
  Report rep;
  rep.payload = {{"lhs", r.lhs},
                 {"rhs", r.rhs},
                 {"std_error", r.std_error},
                 {"bias_allowance", r.bias_allowance},
                 {"tolerance", r.tolerance},
                 {"pass", r.pass},
                 {"experimental", r.experimental}};
  rep.csv_header = {"lhs", "rhs", "std_error", "bias_allowance", "tolerance", "pass", "experimental"};
  rep.csv_rows = {{num(r.lhs), num(r.rhs), num(r.std_error), num(r.bias_allowance), num(r.tolerance), flag(r.pass),
                   flag(r.experimental)}};
  return rep;
}

Report run_girsanov(const RunConfig& cfg) {
  const auto r = girsanov_check(cfg.system, cfg.girsanov_lambda, need_x0(cfg), control_or_zero(cfg), need_sim(cfg),
                                cfg.girsanov_dt);
  Report rep;
  json rows = json::array();
  rep.csv_header = {"dt", "sup_error", "std_error"};
  for (const auto& row : r.rows) {
    rows.push_back({{"dt", row.dt}, {"sup_error", row.sup_error}, {"std_error", row.std_error}});
    rep.csv_rows.push_back({num(row.dt), num(row.sup_error), num(row.std_error)});
  }
  rep.payload = {{"lambda", r.lambda},
                 {"rows", rows},
                 {"fitted_order", r.fitted_order ? json(*r.fitted_order) : json(nullptr)},
                 {"monotone", r.monotone}};
  return rep;
}

Report run_apriori(const RunConfig& cfg) {
  if (cfg.apriori_terminals.empty()) throw ConfigError("/apriori/terminals", "missing required field");
  const auto r = apriori_bound_check(cfg.system, cfg.apriori_terminals, need_sim(cfg));
  Report rep;
  json samples = json::array();
  rep.csv_header = {"sample", "xi_norm", "sup_y_sq", "int_z_sq", "xi_sq_mean", "ratio", "exact_ratio", "shape_group"};
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    samples.push_back({{"xi_norm", s.xi_norm},
                       {"sup_y_sq", s.sup_y_sq},
                       {"int_z_sq", s.int_z_sq},
                       {"xi_sq_mean", s.xi_sq_mean},
                       {"ratio", s.ratio},
                       {"exact_ratio", s.exact_ratio ? json(*s.exact_ratio) : json(nullptr)},
                       {"shape_group", s.shape_group}});
    rep.csv_rows.push_back({num(static_cast<long long>(i)), num(s.xi_norm), num(s.sup_y_sq), num(s.int_z_sq),
                            num(s.xi_sq_mean), num(s.ratio), s.exact_ratio ? num(*s.exact_ratio) : "",
                            num(static_cast<long long>(s.shape_group))});
  }
  rep.payload = {
      {"k_hat", r.k_hat}, {"max_spread", r.max_spread}, {"scale_invariant", r.scale_invariant}, {"samples", samples}};
  return rep;
}

Report run_convergence(const RunConfig& cfg) {
  const auto& sim = need_sim(cfg);
  const TerminalSpec terminal =
      cfg.conv.run_bsde ? need_terminal(cfg)
                        : (cfg.terminal ? *cfg.terminal : TerminalSpec::deterministic(Vector::Zero(cfg.system.n())));
  const auto t = approximation_convergence(cfg.system, terminal, sim, cfg.conv_n, cfg.conv_delta, cfg.conv);
  Report rep;
  json semi = json::array(), bsde = json::array();
  rep.csv_header = {"table", "nres", "delta", "err_n", "err_delta", "err_total", "sup_mean_sq"};
  for (const auto& r : t.semigroup) {
    semi.push_back({{"nres", r.nres},
                    {"delta", r.delta},
                    {"err_n", r.err_n},
                    {"err_delta", r.err_delta},
                    {"err_total", r.err_total}});
    rep.csv_rows.push_back({"semigroup", num(r.nres), num(r.delta), num(r.err_n), num(r.err_delta), num(r.err_total), ""});
  }
  for (const auto& r : t.bsde) {
    bsde.push_back({{"nres", r.nres}, {"delta", r.delta}, {"sup_mean_sq", r.sup_mean_sq}});
    rep.csv_rows.push_back({"bsde", num(r.nres), num(r.delta), "", "", "", num(r.sup_mean_sq)});
  }
  rep.payload = {{"lambda", t.lambda},
                 {"semigroup", semi},
                 {"bsde", bsde},
                 {"n_monotone", t.n_monotone},
                 {"delta_monotone", t.delta_monotone},
                 {"bsde_n_monotone", t.bsde_n_monotone},
                 {"bsde_delta_monotone", t.bsde_delta_monotone}};
  return rep;
}

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

bool is_input_error(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
         dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
         dynamic_cast<const HypothesisError*>(&e) || dynamic_cast<const EllipticityError*>(&e) ||
         dynamic_cast<const json::exception*>(&e);
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {
      "check-n1", "check-n2",  "invariant-subspace", "lambda-set", "verdict",  "assemble",   "ellipticity",
      "b-coeffs", "simulate-forward", "duality",     "girsanov",   "apriori", "convergence"};
  return names;
}

Report run(const std::string& subcommand, const RunConfig& cfg) {
  if (subcommand == "check-n1") return run_check(cfg, Condition::N1);
  if (subcommand == "check-n2") return run_check(cfg, Condition::N2);
  if (subcommand == "invariant-subspace") return run_invariant_subspace(cfg);
  if (subcommand == "lambda-set") return run_lambda_set(cfg);
  if (subcommand == "verdict") return run_verdict(cfg);
  if (subcommand == "assemble") return run_assemble(cfg);
  if (subcommand == "ellipticity") return run_ellipticity(cfg);
  if (subcommand == "b-coeffs") return run_b_coeffs(cfg);
  if (subcommand == "simulate-forward") return run_simulate_forward(cfg);
  if (subcommand == "duality") return run_duality(cfg);
  if (subcommand == "girsanov") return run_girsanov(cfg);
  if (subcommand == "apriori") return run_apriori(cfg);
  if (subcommand == "convergence") return run_convergence(cfg);
  throw UsageError("unknown subcommand '" + subcommand + "'");
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Controllability analysis for linear stochastic systems dX = (AX + Bu)dt + CX dW"};
  std::string subcommand, config_path, output, format;
  std::uint64_t seed = 0;
  int threads = -1;
  std::string choices;
  for (const auto& s : subcommands()) choices += (choices.empty() ? "" : ", ") + s;
  app.add_option("subcommand", subcommand, "One of: " + choices)->required();
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--output", output, "Report path (default: config output_path, else stdout)");
  app.add_option("--format", format, "json or csv");
  auto* seed_opt = app.add_option("--seed", seed, "Overrides sim.seed");
  app.add_option("--threads", threads, "Worker threads, 0 = all available (falls back to SCK_THREADS)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), subcommand) == names.end())
      throw UsageError("unknown subcommand '" + subcommand + "' (expected one of: " + choices + ")");

    if (threads < 0) {
      threads = 0;
      if (const char* env = std::getenv("SCK_THREADS")) {
        try {
          threads = std::stoi(env);
        } catch (const std::exception&) {
          throw UsageError("SCK_THREADS must be an integer");
        }
        if (threads < 0) throw UsageError("SCK_THREADS must be >= 0");
      }
    }
    threads = resolve_threads(threads);

    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file '" + config_path + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    Overrides ov;
    if (*seed_opt) ov.seed = seed;
    if (!output.empty()) ov.output_path = output;
    if (!format.empty()) ov.format = format;
    RunConfig cfg = parse_config(doc, ov);
    if (cfg.sim) cfg.sim->threads = threads;

    const auto start = std::chrono::steady_clock::now();
    const Report report = run(subcommand, cfg);
    const double duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string text = cfg.format == "csv" ? report_csv(subcommand, cfg, report, duration, threads)
                                                 : report_document(subcommand, cfg, report, duration, threads).dump(2) + "\n";
    if (cfg.output_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(cfg.output_path, std::ios::binary);
      out << text;
      out.close();
      if (!out) throw IoError("cannot write report to '" + cfg.output_path + "'");
    }
    return 0;
  } catch (const std::exception& e) {
    const bool input = is_input_error(e);
    std::cerr << "sck: " << (input ? "input error: " : "error: ") << e.what() << "\n";
    return input ? 1 : 2;
  }
}

}  // namespace sck::cli
