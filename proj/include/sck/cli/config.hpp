#pragma once

#include "sck/controllability.hpp"
#include "sck/errors.hpp"
#include "sck/galerkin.hpp"
#include "sck/sde.hpp"
#include "sck/system_model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sck::cli {

using json = nlohmann::ordered_json;

/// Invalid configuration; `where` is a JSON pointer such as /system/inline/B.
class ConfigError : public Error {
 public:
  ConfigError(std::string where, const std::string& what)
      : Error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Real literal grammar: decimal numbers, "pi", binary "*" and "^" and a
/// leading unary minus, e.g. "-3*pi^2". "^" binds tighter than "*".
double parse_real_expr(std::string_view text);

/// Parsed run configuration. `resolved` holds the same content with every
/// default filled in and every literal evaluated, and is itself a valid
/// configuration.
struct RunConfig {
  StochasticSystem system{Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  std::string system_source;  ///< inline | example2 | divform1d
  std::optional<HeatSystemSpec> heat;
  ToleranceConfig tolerances;
  std::optional<SimConfig> sim;
  int store_stride = -1;  ///< simulate-forward summary stride; -1 = steps / 10
  std::vector<double> lambda_grid{0.0};
  std::string output_path;
  std::string format = "json";

  HautusOptions hautus;
  VerdictOptions verdict;
  std::optional<Vector> x0;
  std::optional<ControlSpec> control;
  std::optional<TerminalSpec> terminal;
  double girsanov_lambda = -1.0;
  std::vector<double> girsanov_dt{1e-2, 5e-3, 2.5e-3, 1.25e-3};
  std::vector<TerminalSpec> apriori_terminals;
  std::vector<double> conv_n{10, 100, 1000};
  std::vector<double> conv_delta{1e-1, 1e-2, 1e-4};
  ConvergenceOptions conv;
  CoefficientFn ell_a = CoefficientFn::constant(1.0);
  CoefficientFn ell_c = CoefficientFn::constant(0.0);
  double ell_alpha = 0.75;
  int ell_grid = 1000;

  json resolved;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_path;
  std::optional<std::string> format;
};

/// Row-major nested arrays.
json matrix_json(const Matrix& M);
json vector_json(const Vector& v);

/// Validates and resolves a configuration document.
RunConfig parse_config(const json& doc, const Overrides& overrides = {});

}  // namespace sck::cli
