#include "sck/cli/config.hpp"

#include <set>
#include <stdexcept>

namespace sck::cli {

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

namespace {

std::string child(const std::string& path, std::string_view key) { return path + "/" + std::string(key); }
std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

double as_real(const json& j, const std::string& path) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    return v;
  }
  if (j.is_string()) {
    try {
      return parse_real_expr(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }
  throw ConfigError(path, "expected a number");
}

long long as_int(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  throw ConfigError(path, "expected an integer");
}

std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const long long v = as_int(j, path);
  if (v < 0) throw ConfigError(path, "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> as_reals(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_real(j[i], child(path, i)));
  return out;
}

Vector as_vector(const json& j, const std::string& path) {
  const auto v = as_reals(j, path);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    rows.push_back(as_reals(j[i], child(path, i)));
    if (rows.back().size() != rows.front().size() || rows.back().empty())
      throw ConfigError(child(path, i), "rows must be non-empty and of equal length");
  }
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return M;
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ConfigError(child(path, key), "missing required field");
  return *it;
}

const json* optional(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const auto it = obj.find(std::string(key));
  return it == obj.end() ? nullptr : &*it;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(child(path, it.key()), "unknown field");
}

json reals_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

CoefficientFn parse_coefficient(const json& j, const std::string& path) {
  if (j.is_number() || j.is_string()) return CoefficientFn::constant(as_real(j, path));
  const std::string type = require(j, "type", path).is_string() ? j["type"].get<std::string>() : "";
  if (type == "constant") {
    reject_unknown(j, {"type", "value"}, path);
    return CoefficientFn::constant(as_real(require(j, "value", path), child(path, "value")));
  }
  if (type == "polynomial") {
    reject_unknown(j, {"type", "coeffs"}, path);
    return CoefficientFn::polynomial(as_reals(require(j, "coeffs", path), child(path, "coeffs")));
  }
  if (type == "trig") {
    reject_unknown(j, {"type", "cos", "sin"}, path);
    std::vector<double> c, s;
    if (const json* v = optional(j, "cos", path)) c = as_reals(*v, child(path, "cos"));
    if (const json* v = optional(j, "sin", path)) s = as_reals(*v, child(path, "sin"));
    return CoefficientFn::trigonometric(std::move(c), std::move(s));
  }
  throw ConfigError(child(path, "type"), "expected constant, polynomial or trig");
}

json coefficient_json(const CoefficientFn& f) {
  switch (f.kind()) {
    case CoefficientFn::Kind::Constant:
      return {{"type", "constant"}, {"value", f.coeffs().empty() ? 0.0 : f.coeffs()[0]}};
    case CoefficientFn::Kind::Polynomial:
      return {{"type", "polynomial"}, {"coeffs", reals_json(f.coeffs())}};
    case CoefficientFn::Kind::Trigonometric:
      return {{"type", "trig"}, {"cos", reals_json(f.coeffs())}, {"sin", reals_json(f.sin_coeffs())}};
  }
  return nullptr;
}

// Library validation errors raised while building an object are reported
// against the config field that produced it.
template <class F>
auto at_path(const std::string& path, F&& build) {
  try {
    return build();
  } catch (const ConfigError&) {
    throw;
  } catch (const DimensionError& e) {
    throw ConfigError(path, e.what());
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  } catch (const EllipticityError& e) {
    throw ConfigError(path, e.what());
  }
}

void parse_system(const json& doc, RunConfig& out) {
  const std::string path = "/system";
  const json& sys = require(doc, "system", "");
  if (!sys.is_object() || sys.size() != 1)
    throw ConfigError(path, "expected exactly one of inline, example2, divform1d");
  const std::string kind = sys.begin().key();
  const json& body = sys.begin().value();
  const std::string bp = child(path, kind);
  json resolved;
  if (kind == "inline") {
    reject_unknown(body, {"A", "B", "C", "C1", "C2", "gamma"}, bp);
    Matrix A = as_matrix(require(body, "A", bp), child(bp, "A"));
    Matrix B = as_matrix(require(body, "B", bp), child(bp, "B"));
    const json* C = optional(body, "C", bp);
    const json* C1 = optional(body, "C1", bp);
    const json* C2 = optional(body, "C2", bp);
    if (C && (C1 || C2)) throw ConfigError(child(bp, "C"), "give either C or the pair C1, C2");
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw ConfigError(child(bp, "A"), "must be square");
    if (B.rows() != n) throw ConfigError(child(bp, "B"), "must have as many rows as A");
    Matrix c1 = Matrix::Zero(n, n), c2 = Matrix::Zero(n, n);
    if (C) c1 = as_matrix(*C, child(bp, "C"));
    if (C1) c1 = as_matrix(*C1, child(bp, "C1"));
    if (C2) c2 = as_matrix(*C2, child(bp, "C2"));
    if (c1.rows() != n || c1.cols() != n) throw ConfigError(child(bp, C ? "C" : "C1"), "must match A");
    if (c2.rows() != n || c2.cols() != n) throw ConfigError(child(bp, "C2"), "must match A");
    double gamma = 0.0;
    if (const json* g = optional(body, "gamma", bp)) gamma = as_real(*g, child(bp, "gamma"));
    out.system = at_path(bp, [&] { return StochasticSystem(A, B, c1, c2, gamma); });
    resolved = {{"A", matrix_json(A)}, {"B", matrix_json(B)}, {"C1", matrix_json(c1)}, {"C2", matrix_json(c2)},
                {"gamma", gamma}};
  } else if (kind == "example2") {
    reject_unknown(body, {"N", "b_coeffs"}, bp);
    const long long N = as_int(require(body, "N", bp), child(bp, "N"));
    if (N < 2 || N > 4096) throw ConfigError(child(bp, "N"), "must be in [2, 4096]");
    const Vector b = as_vector(require(body, "b_coeffs", bp), child(bp, "b_coeffs"));
    if (b.size() != N) throw ConfigError(child(bp, "b_coeffs"), "must have N entries");
    out.system = at_path(bp, [&] { return assemble_example2(static_cast<int>(N), b); });
    resolved = {{"N", N}, {"b_coeffs", vector_json(b)}};
  } else if (kind == "divform1d") {
    reject_unknown(body, {"N", "a", "c", "b", "quad_order"}, bp);
    HeatSystemSpec spec;
    const long long N = as_int(require(body, "N", bp), child(bp, "N"));
    if (N < 2 || N > 4096) throw ConfigError(child(bp, "N"), "must be in [2, 4096]");
    spec.N = static_cast<int>(N);
    if (const json* v = optional(body, "a", bp)) spec.a = parse_coefficient(*v, child(bp, "a"));
    if (const json* v = optional(body, "c", bp)) spec.c = parse_coefficient(*v, child(bp, "c"));
    if (const json* v = optional(body, "b", bp)) spec.b = parse_coefficient(*v, child(bp, "b"));
    spec.quad_order = 2 * spec.N;
    if (const json* v = optional(body, "quad_order", bp)) {
      const long long q = as_int(*v, child(bp, "quad_order"));
      if (q < 2 * N || q > 100000) throw ConfigError(child(bp, "quad_order"), "must be in [2N, 100000]");
      spec.quad_order = static_cast<int>(q);
    }
    out.system = at_path(bp, [&] { return assemble_divform_1d(spec); });
    out.heat = spec;
    resolved = {{"N", N},
                {"a", coefficient_json(spec.a)},
                {"c", coefficient_json(spec.c)},
                {"b", coefficient_json(spec.b)},
                {"quad_order", spec.quad_order}};
  } else {
    throw ConfigError(bp, "unknown system source (expected inline, example2 or divform1d)");
  }
  out.system_source = kind;
  out.resolved["system"] = {{kind, resolved}};
}

void parse_tolerances(const json& doc, RunConfig& out) {
  const std::string path = "/tolerances";
  if (const json* t = optional(doc, "tolerances", "")) {
    reject_unknown(*t, {"psd_tol", "rank_tol", "zero_tol", "eps_a"}, path);
    if (const json* v = optional(*t, "psd_tol", path)) out.tolerances.psd_tol = as_real(*v, child(path, "psd_tol"));
    if (const json* v = optional(*t, "rank_tol", path)) out.tolerances.rank_tol = as_real(*v, child(path, "rank_tol"));
    if (const json* v = optional(*t, "zero_tol", path)) out.tolerances.zero_tol = as_real(*v, child(path, "zero_tol"));
    if (const json* v = optional(*t, "eps_a", path)) out.tolerances.eps_a = as_real(*v, child(path, "eps_a"));
  }
  at_path(path, [&] {
    out.tolerances.validate();
    return 0;
  });
  const auto& t = out.tolerances;
  out.resolved["tolerances"] = {
      {"psd_tol", t.psd_tol}, {"rank_tol", t.rank_tol}, {"zero_tol", t.zero_tol}, {"eps_a", t.eps_a}};
}

void parse_sim(const json& doc, const Overrides& ov, RunConfig& out) {
  const std::string path = "/sim";
  const json* s = optional(doc, "sim", "");
  if (!s) {
    if (ov.seed) {
      SimConfig c;
      c.seed = *ov.seed;
      out.sim = c;
    } else {
      return;
    }
  } else {
    reject_unknown(*s, {"T", "dt", "n_paths", "seed", "regression_degree", "store_stride"}, path);
    SimConfig c;
    if (const json* v = optional(*s, "T", path)) c.T = as_real(*v, child(path, "T"));
    if (const json* v = optional(*s, "dt", path)) c.dt = as_real(*v, child(path, "dt"));
    if (const json* v = optional(*s, "n_paths", path)) c.n_paths = as_int(*v, child(path, "n_paths"));
    if (const json* v = optional(*s, "seed", path)) c.seed = as_u64(*v, child(path, "seed"));
    if (const json* v = optional(*s, "regression_degree", path))
      c.regression_degree = static_cast<int>(as_int(*v, child(path, "regression_degree")));
    if (const json* v = optional(*s, "store_stride", path))
      out.store_stride = static_cast<int>(as_int(*v, child(path, "store_stride")));
    if (ov.seed) c.seed = *ov.seed;
    out.sim = c;
  }
  at_path(path, [&] {
    out.sim->validate();
    return 0;
  });
  const auto& c = *out.sim;
  if (out.store_stride < 0) out.store_stride = std::max(1, c.steps() / 10);
  out.resolved["sim"] = {{"T", c.T},
                         {"dt", c.dt},
                         {"n_paths", c.n_paths},
                         {"seed", c.seed},
                         {"regression_degree", c.regression_degree},
                         {"store_stride", out.store_stride}};
}

TerminalSpec parse_terminal(const json& j, const std::string& path, int n) {
  if (!j.is_object()) throw ConfigError(path, "expected an object with xi or xi0/xi1");
  reject_unknown(j, {"xi", "xi0", "xi1"}, path);
  TerminalSpec t;
  if (const json* xi = optional(j, "xi", path)) {
    if (optional(j, "xi0", path) || optional(j, "xi1", path))
      throw ConfigError(child(path, "xi"), "give either xi or xi0/xi1");
    t = TerminalSpec::deterministic(as_vector(*xi, child(path, "xi")));
  } else {
    t = TerminalSpec::linear_in_wt(as_vector(require(j, "xi0", path), child(path, "xi0")),
                                   as_vector(require(j, "xi1", path), child(path, "xi1")));
  }
  at_path(path, [&] {
    t.check(n);
    return 0;
  });
  return t;
}

json terminal_json(const TerminalSpec& t) {
  if (t.kind == TerminalSpec::Kind::Deterministic) return {{"xi", vector_json(t.xi0)}};
  return {{"xi0", vector_json(t.xi0)}, {"xi1", vector_json(t.xi1)}};
}

ControlSpec parse_control(const json& j, const std::string& path, const StochasticSystem& sys) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const json& type = require(j, "type", path);
  const std::string kind = type.is_string() ? type.get<std::string>() : "";
  if (kind == "zero") {
    reject_unknown(j, {"type"}, path);
    return ControlSpec::zero(sys.m());
  }
  if (kind == "constant") {
    reject_unknown(j, {"type", "value"}, path);
    const Vector u = as_vector(require(j, "value", path), child(path, "value"));
    if (u.size() != sys.m()) throw ConfigError(child(path, "value"), "must have m entries");
    return ControlSpec::constant(u);
  }
  if (kind == "piecewise") {
    reject_unknown(j, {"type", "values"}, path);
    const Matrix v = as_matrix(require(j, "values", path), child(path, "values"));
    if (v.rows() != sys.m()) throw ConfigError(child(path, "values"), "must have m rows");
    return ControlSpec::piecewise_constant(v);
  }
  if (kind == "feedback") {
    reject_unknown(j, {"type", "K"}, path);
    const Matrix K = as_matrix(require(j, "K", path), child(path, "K"));
    if (K.rows() != sys.m() || K.cols() != sys.n()) throw ConfigError(child(path, "K"), "must be m x n");
    return ControlSpec::feedback(K);
  }
  throw ConfigError(child(path, "type"), "expected zero, constant, piecewise or feedback");
}

json control_json(const ControlSpec& c) {
  switch (c.kind()) {
    case ControlSpec::Kind::Zero:
      return {{"type", "zero"}};
    case ControlSpec::Kind::Constant:
      return {{"type", "constant"}, {"value", vector_json(c.value())}};
    case ControlSpec::Kind::PiecewiseConstant:
      return {{"type", "piecewise"}, {"values", matrix_json(c.matrix())}};
    case ControlSpec::Kind::Feedback:
      return {{"type", "feedback"}, {"K", matrix_json(c.matrix())}};
  }
  return nullptr;
}

void parse_sections(const json& doc, RunConfig& out) {
  const int n = out.system.n();
  auto& r = out.resolved;

  if (const json* v = optional(doc, "lambda_grid", "")) {
    out.lambda_grid = as_reals(*v, "/lambda_grid");
    if (out.lambda_grid.empty()) throw ConfigError("/lambda_grid", "must not be empty");
  }
  r["lambda_grid"] = reals_json(out.lambda_grid);

  json points = json::array();
  if (const json* v = optional(doc, "condition_points", "")) {
    if (!v->is_array()) throw ConfigError("/condition_points", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = child("/condition_points", i);
      const json& e = (*v)[i];
      reject_unknown(e, {"lambda", "alpha"}, p);
      const double l = as_real(require(e, "lambda", p), child(p, "lambda"));
      const double a = as_real(require(e, "alpha", p), child(p, "alpha"));
      out.hautus.explicit_points.emplace_back(l, a);
      points.push_back({{"lambda", l}, {"alpha", a}});
    }
  }
  r["condition_points"] = points;
  if (const json* v = optional(doc, "alpha_grid", "")) out.hautus.alpha_grid = as_reals(*v, "/alpha_grid");
  r["alpha_grid"] = reals_json(out.hautus.alpha_grid);

  if (const json* v = optional(doc, "verdict", "")) {
    reject_unknown(*v, {"subspace_decisive"}, "/verdict");
    if (const json* d = optional(*v, "subspace_decisive", "/verdict")) {
      if (!d->is_boolean()) throw ConfigError("/verdict/subspace_decisive", "expected a boolean");
      out.verdict.subspace_decisive = d->get<bool>();
    }
  }
  r["verdict"] = {{"subspace_decisive", out.verdict.subspace_decisive}};

  if (const json* v = optional(doc, "x0", "")) {
    out.x0 = as_vector(*v, "/x0");
    if (out.x0->size() != n) throw ConfigError("/x0", "must have n entries");
    r["x0"] = vector_json(*out.x0);
  }
  if (const json* v = optional(doc, "control", "")) {
    out.control = parse_control(*v, "/control", out.system);
    if (out.sim)
      at_path("/control", [&] {
        out.control->check(out.system, *out.sim);
        return 0;
      });
    r["control"] = control_json(*out.control);
  }
  if (const json* v = optional(doc, "terminal", "")) {
    out.terminal = parse_terminal(*v, "/terminal", n);
    r["terminal"] = terminal_json(*out.terminal);
  }

  if (const json* v = optional(doc, "girsanov", "")) {
    reject_unknown(*v, {"lambda", "dt_list"}, "/girsanov");
    if (const json* l = optional(*v, "lambda", "/girsanov")) out.girsanov_lambda = as_real(*l, "/girsanov/lambda");
    if (const json* d = optional(*v, "dt_list", "/girsanov")) out.girsanov_dt = as_reals(*d, "/girsanov/dt_list");
  }
  r["girsanov"] = {{"lambda", out.girsanov_lambda}, {"dt_list", reals_json(out.girsanov_dt)}};

  json terms = json::array();
  if (const json* v = optional(doc, "apriori", "")) {
    reject_unknown(*v, {"terminals"}, "/apriori");
    const json& list = require(*v, "terminals", "/apriori");
    if (!list.is_array()) throw ConfigError("/apriori/terminals", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      out.apriori_terminals.push_back(parse_terminal(list[i], child("/apriori/terminals", i), n));
      terms.push_back(terminal_json(out.apriori_terminals.back()));
    }
  }
  r["apriori"] = {{"terminals", terms}};

  if (const json* v = optional(doc, "convergence", "")) {
    const std::string p = "/convergence";
    reject_unknown(*v, {"n_list", "delta_list", "lambda", "run_bsde"}, p);
    if (const json* x = optional(*v, "n_list", p)) out.conv_n = as_reals(*x, child(p, "n_list"));
    if (const json* x = optional(*v, "delta_list", p)) out.conv_delta = as_reals(*x, child(p, "delta_list"));
    if (const json* x = optional(*v, "lambda", p)) out.conv.lambda = as_real(*x, child(p, "lambda"));
    if (const json* x = optional(*v, "run_bsde", p)) {
      if (!x->is_boolean()) throw ConfigError(child(p, "run_bsde"), "expected a boolean");
      out.conv.run_bsde = x->get<bool>();
    }
  }
  r["convergence"] = {{"n_list", reals_json(out.conv_n)},
                      {"delta_list", reals_json(out.conv_delta)},
                      {"lambda", out.conv.lambda},
                      {"run_bsde", out.conv.run_bsde}};

  if (out.heat) {
    out.ell_a = out.heat->a;
    out.ell_c = out.heat->c;
  }
  if (const json* v = optional(doc, "ellipticity", "")) {
    const std::string p = "/ellipticity";
    reject_unknown(*v, {"a", "c", "alpha", "grid_points"}, p);
    if (const json* x = optional(*v, "a", p)) out.ell_a = parse_coefficient(*x, child(p, "a"));
    if (const json* x = optional(*v, "c", p)) out.ell_c = parse_coefficient(*x, child(p, "c"));
    if (const json* x = optional(*v, "alpha", p)) out.ell_alpha = as_real(*x, child(p, "alpha"));
    if (const json* x = optional(*v, "grid_points", p)) {
      const long long g = as_int(*x, child(p, "grid_points"));
      if (g < 100 || g > 10000000) throw ConfigError(child(p, "grid_points"), "must be in [100, 1e7]");
      out.ell_grid = static_cast<int>(g);
    }
  }
  r["ellipticity"] = {{"a", coefficient_json(out.ell_a)},
                      {"c", coefficient_json(out.ell_c)},
                      {"alpha", out.ell_alpha},
                      {"grid_points", out.ell_grid}};
}

}  // namespace

RunConfig parse_config(const json& doc, const Overrides& overrides) {
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
  reject_unknown(doc,
                 {"system", "tolerances", "sim", "lambda_grid", "output_path", "format", "condition_points",
                  "alpha_grid", "verdict", "x0", "control", "terminal", "girsanov", "apriori", "convergence",
                  "ellipticity"},
                 "");
  RunConfig out;
  out.resolved = json::object();
  parse_system(doc, out);
  parse_tolerances(doc, out);
  parse_sim(doc, overrides, out);
  parse_sections(doc, out);

  if (const json* v = optional(doc, "output_path", "")) {
    if (!v->is_string()) throw ConfigError("/output_path", "expected a string");
    out.output_path = v->get<std::string>();
  }
  if (overrides.output_path) out.output_path = *overrides.output_path;
  if (const json* v = optional(doc, "format", "")) {
    if (!v->is_string()) throw ConfigError("/format", "expected a string");
    out.format = v->get<std::string>();
  }
  if (overrides.format) out.format = *overrides.format;
  if (out.format != "json" && out.format != "csv") throw ConfigError("/format", "must be json or csv");
  out.resolved["output_path"] = out.output_path;
  out.resolved["format"] = out.format;
  return out;
}

}  // namespace sck::cli
