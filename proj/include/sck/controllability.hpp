#pragma once

#include "sck/system_model.hpp"

#include <complex>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace sck {

/// Stochastic Hautus-type necessary conditions.
///  N1: |B^T y| + |(A^T - alpha I) y| > 0 for y != 0, alpha < 0.
///  N2: |B^T y| + |(A^T + lambda C^T - alpha I) y| > 0 for y != 0,
///      (lambda, alpha) in Lambda x R_-.
enum class Condition { N1, N2 };

std::string_view to_string(Condition c);

struct HautusPoint {
  double lambda = 0.0;
  double alpha = 0.0;
  double sigma_min = 0.0;
  bool violated = false;
  /// Imaginary part of the eigenvalue the point was generated from. Non-zero
  /// values mark tests on a realified 2-dimensional invariant subspace, which
  /// lie outside the real-alpha condition.
  double alpha_imag = 0.0;
  enum class Source { Eigenvalue, Explicit, Grid } source = Source::Eigenvalue;
};

struct HautusReport {
  Condition condition = Condition::N1;
  std::vector<HautusPoint> points;  ///< sorted by (lambda, alpha)
  std::optional<Vector> witness;    ///< unit vector for the strongest real violation
  std::optional<std::pair<double, double>> witness_point;

  /// Violations of the real condition (points generated from complex
  /// eigenvalues are not counted).
  int violation_count() const;
  int complex_violation_count() const;
  bool passed() const { return violation_count() == 0; }
  /// Smallest sigma_min over eigenvalue-generated real points; +inf if none.
  double min_sigma() const;
};

struct HautusOptions {
  /// Additional (lambda, alpha) points evaluated verbatim.
  std::vector<std::pair<double, double>> explicit_points;
  /// alpha values evaluated for every lambda (margin plots).
  std::vector<double> alpha_grid;
};

struct KalmanHautusResult {
  bool full_rank_everywhere;
  double min_sigma;
};

/// Deterministic Hautus test of (A, B) on the supplied complex samples plus
/// every eigenvalue of A^T.
KalmanHautusResult kalman_hautus_rank(const Matrix& A, const Matrix& B,
                                      std::vector<std::complex<double>> s_samples,
                                      const ToleranceConfig& cfg = {});

/// Smallest singular value of [op - s I; Bt] for complex s, computed on the
/// real 2(n+m) x 2n realification.
double stacked_sigma_min(const Matrix& op, const Matrix& Bt, std::complex<double> s);

/// Evaluate condition N1 (lambdas ignored) or N2 (lambdas must lie in Lambda).
HautusReport check_condition(const StochasticSystem& sys, const std::vector<double>& lambdas,
                             Condition condition, const ToleranceConfig& cfg = {},
                             const HautusOptions& options = {});

/// Largest V inside Ker B^T with A^T V contained in V + C^T V.
SubspaceBasis strict_invariant_subspace(const Matrix& A, const Matrix& C, const Matrix& B,
                                        const ToleranceConfig& cfg = {});

/// When B is square and commutes (transposed) with A and C, returns whether
/// B is surjective. Otherwise std::nullopt.
std::optional<bool> commuting_case_check(const StochasticSystem& sys, const ToleranceConfig& cfg = {});

enum class VerdictTag { ApproxControllable, NotApproxControllable, NecessaryConditionsOnlyPassed };

std::string_view to_string(VerdictTag v);

struct VerdictOptions {
  /// When false, the truncation is treated as a proxy for an infinite
  /// dimensional system: the invariant-subspace criterion is reported but only
  /// the necessary conditions decide, and a clean run yields
  /// NecessaryConditionsOnlyPassed.
  bool subspace_decisive = true;
};

struct ControllabilityVerdict {
  int invariant_subspace_dim = 0;
  bool n1_passed = true;
  bool n2_passed = true;
  std::optional<bool> commuting_case;
  VerdictTag verdict = VerdictTag::ApproxControllable;
  /// Nontrivial invariant subspace while N1 and N2 both pass, or a trivial
  /// one while a necessary condition fails.
  bool consistency_warning = false;

  SubspaceBasis subspace{1};
  HautusReport n1;
  HautusReport n2;
  std::vector<double> skipped_lambdas;  ///< grid values outside Lambda
};

ControllabilityVerdict verdict(const StochasticSystem& sys, const std::vector<double>& lambdas,
                               const ToleranceConfig& cfg = {}, const VerdictOptions& options = {});

}  // namespace sck
