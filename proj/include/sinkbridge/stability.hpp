#pragma once

#include <limits>
#include <optional>

#include "sinkbridge/measures.hpp"
#include "sinkbridge/scaling.hpp"

namespace sinkbridge {

struct StabilityConstants {
  double rho_A = 0.0;
  double C_A = 1.0;
  double eps_max = 0.0;
  double C_star = 1.0;
  double eps0 = 0.0;
  double eps_pot = 0.0;
  double tau = 0.0;
  double t_D = 0.0;
  double Phi = 0.0;
  // NaN unless a variance matrix was supplied.
  double eps_cov = std::numeric_limits<double>::quiet_NaN();
  double s_max = std::numeric_limits<double>::quiet_NaN();

  // Inputs the constants were evaluated at.
  double sigma = 0.0;
  double R = 0.0;
  double D = 0.0;
  double K = 0.0;
  double delta = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double lambda_mass = 0.0;
  Eigen::Index m = 0;
  Eigen::Index n = 0;

  /// eps0 <= 1 / (50 C_star^2)
  bool eps0_condition() const { return eps0 * 50.0 * C_star * C_star <= 1.0; }
  /// Parts of the probability lower bounds that do not involve the
  /// unspecified absolute constant in front of Phi.
  double prob_e1_lower() const;
  double prob_e2_lower() const;
  double prob_e3_lower() const;
};

/// min over row pairs (i1, i2), including i1 == i2, of n^-1 sum_j A(i1,j) A(i2,j)
double row_alignment(const Matrix& a);

/// 1 + 9 max r max c / (rho_A m n)
double stability_constant_CA(const Matrix& a, const MarginPair& margins);

/// tau = (D+1) log(m v n) + log 4 and t_D = sigma sqrt(2 (m v n) tau) + 2 R tau
double concentration_tau(Eigen::Index m, Eigen::Index n, double D);
double spectral_threshold_tD(Eigen::Index m, Eigen::Index n, double sigma, double R,
                             double D);

/// Evaluates every constant of the concentration and comparison bounds.
/// `var` (entrywise Var(X_ij)) enables s_max and eps_cov.
StabilityConstants concentration_constants(const ScalingProblem& problem, double sigma,
                                           double R, double D,
                                           const std::optional<Matrix>& var = std::nullopt);

struct PotentialStabilityReport {
  double eps = 0.0;
  double eps_max = 0.0;
  double C_A = 1.0;
  double bound = 0.0;
  double actual = 0.0;
  bool holds = false;
  // False when eps >= eps_max; the report is still computed.
  bool within_eps_max = false;
  Potentials potentials;
};

/// Exact potentials of A for `margins` in the minimal-norm gauge, compared
/// against 4 C_A eps.
PotentialStabilityReport potential_stability_check(const Matrix& a,
                                                   const MarginPair& margins,
                                                   double tol = 1e-12);

/// Discrete bridge: reference R (any positive total) rescaled to the
/// probability margins (p, q).
Matrix discrete_bridge(const Matrix& reference, const Vector& p, const Vector& q,
                       double tol = 1e-12);

/// Cost kappa(i,j) = -log(R_ij / (p_i q_j)) on normalized objects.
/// Returns sup |kappa| (or sup kappa^+ when positive_part) over cells with
/// p_i q_j > 0. Throws UnboundedCost when R vanishes on such a cell.
double cost_sup(const Matrix& reference, const Vector& p, const Vector& q,
                bool positive_part);

/// exp(3/2 max(|kappa^+|, |kappa'^+|)) d_H(R, R')
double kernel_stability_rhs(const Matrix& reference, const Matrix& reference2,
                            const Vector& p, const Vector& q);

/// 4 max(|kappa|, |kappa'|) (|p - p'|_1 + |q - q'|_1)
double margin_stability_rhs(const Matrix& reference, const Vector& p, const Vector& q,
                            const Vector& p2, const Vector& q2);

/// 8 (|kappa| + M)(|p - p'|_1 + |q - q'|_1)
///   + 4 exp(3 max(|kappa| + M, |kappa'|)) d_H(R, R')^2
double total_stability_rhs(const Matrix& reference, const Vector& p, const Vector& q,
                           const Matrix& reference2, const Vector& p2,
                           const Vector& q2);

/// M = max |log(p_i q_j / (p'_i q'_j))|
double product_margin_ratio_M(const Vector& p, const Vector& q, const Vector& p2,
                              const Vector& q2);

/// 8 (K + 4 log(1/delta)) (l1_r + l1_c) + 4 e^{3K} delta^-12 dH_ref^2
double deterministic_limit_rhs(double K, double delta, double l1_r, double l1_c,
                               double dH_ref);

struct ScalabilityProbabilityBound {
  double bound1 = 0.0;
  double bound_exp = 0.0;
  // Whether the p0 threshold that validates bound_exp holds.
  bool threshold_holds = false;
  double threshold = 0.0;
};

ScalabilityProbabilityBound scalability_probability_bound(const MarginPair& margins,
                                                          double p0, double gamma,
                                                          double eta);

}  // namespace sinkbridge
