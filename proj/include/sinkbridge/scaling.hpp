#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "sinkbridge/error.hpp"

namespace sinkbridge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Target row sums r, column sums c and their common total N.
struct MarginPair {
  Vector r;
  Vector c;
  double N = 0.0;

  /// Validates nonnegativity and sum(r) == sum(c) (1e-9 relative).
  static MarginPair make(Vector r, Vector c);
  /// r = c = value * 1.
  static MarginPair uniform(Eigen::Index m, Eigen::Index n, double row_value,
                            double col_value);

  Eigen::Index rows() const { return r.size(); }
  Eigen::Index cols() const { return c.size(); }
  bool strictly_positive() const;
};

/// Nonnegative prior mean together with the target margins.
struct ScalingProblem {
  Matrix lambda;
  MarginPair margins;

  void validate() const;
};

enum class Gauge { BetaCWeighted, MaxEqualized, KernelOrthogonal };

const char* to_string(Gauge gauge);
Gauge gauge_from_string(const std::string& name);

/// Schrödinger potentials; the rescaled matrix is exp(alpha (+) beta) .* lambda.
struct Potentials {
  Vector alpha;
  Vector beta;
  Gauge gauge = Gauge::BetaCWeighted;
};

struct ScalingResult {
  Potentials potentials;
  Matrix rescaled;
  int iterations = 0;
  double final_margin_error = 0.0;
};

struct SinkhornOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  Gauge gauge = Gauge::BetaCWeighted;
  // Called after every full (beta, alpha) sweep with the raw, un-gauged
  // potentials.
  std::function<void(int, const Vector&, const Vector&)> on_sweep;
};

/// Raised when the margin tolerance is not met; carries the last iterate.
class MaxIterationsError : public Error {
 public:
  MaxIterationsError(const std::string& what, ScalingResult partial)
      : Error(ErrorCode::MaxIterations, what), partial_(std::move(partial)) {}
  const ScalingResult& partial() const { return partial_; }

 private:
  ScalingResult partial_;
};

/// Dual Sinkhorn iteration: beta from the column constraint, then alpha from
/// the row constraint, both evaluated as shifted log-sum-exp. Converged when
/// the largest relative margin deviation is at most tol.
ScalingResult sinkhorn_scale(const ScalingProblem& problem,
                             const SinkhornOptions& options = {});

/// exp(alpha (+) beta) .* lambda
Matrix apply_potentials(const Matrix& lambda, const Potentials& pot);

/// max over rows and columns of |margin(x) - target| / target.
double max_relative_margin_error(const Matrix& x, const MarginPair& margins);

/// <alpha, r> + <beta, c> - <exp(alpha (+) beta), lambda>
double dual_objective(const ScalingProblem& problem, const Potentials& pot);

/// sum Z log(Z / lambda) with 0 log 0 = 0; +infinity when Z is not
/// absolutely continuous with respect to lambda.
double kl_to_reference(const Matrix& z, const Matrix& lambda);

enum class ScalabilityMode {
  Exact,  // Menon–Schneider subset condition; requires m + n <= 40
  Auto,   // exact when small, otherwise positive shortcut then Sinkhorn
};

struct ScalabilityVerdict {
  bool scalable = false;
  // Violating row/column subsets (0-based) when not scalable and exact.
  std::vector<int> witness_rows;
  std::vector<int> witness_cols;
  // True when the verdict came from the Sinkhorn-convergence heuristic.
  bool heuristic = false;
};

inline constexpr int kExactScalabilityCap = 40;

ScalabilityVerdict check_scalability(const Matrix& a, const MarginPair& margins,
                                     ScalabilityMode mode = ScalabilityMode::Exact);

/// (alpha - s, beta + s)
Potentials shift_potentials(const Potentials& pot, double s);

/// Applies the gauge shift selected by `gauge`; the scaled matrix is unchanged.
Potentials gauge_fix(const Potentials& pot, const MarginPair& margins,
                     Gauge gauge);

struct GaugeAlignment {
  double distance = 0.0;
  // Minimizing t in max(|a1 - a2 + t|_inf, |b1 - b2 - t|_inf).
  double t = 0.0;
};

GaugeAlignment gauge_alignment(const Potentials& p1, const Potentials& p2);
double gauge_distance(const Potentials& p1, const Potentials& p2);

/// Sup norm of (alpha, beta) at the shift minimizing it.
GaugeAlignment minimal_norm_gauge(const Potentials& pot);

struct PotentialBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Two-sided bound on alpha(i) + beta(j) from the normalized cost
/// log(rbar(i) cbar(j) / lambdabar(i, j)).
PotentialBounds potential_bounds(const ScalingProblem& problem);

}  // namespace sinkbridge
