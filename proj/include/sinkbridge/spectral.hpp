#pragma once

#include <complex>
#include <vector>

#include "sinkbridge/scaling.hpp"

namespace sinkbridge {

struct VarianceProfile {
  Matrix S;
  double s_max = 0.0;
};

struct FluctuationPair {
  Matrix A;
  Matrix A_check;
};

struct DysonSolution {
  Vector grid;
  Vector density;
  double atom = 0.0;
  std::vector<std::complex<double>> stieltjes;
  double eta_final = 0.0;
  bool converged = true;
  // Grid points that did not reach the tolerance on some rung.
  int unconverged_points = 0;
  // Cumulative distribution at the grid points: atom plus the integral of the
  // density, with the continuous part normalized to mass 1 - atom.
  Vector cdf;
  // atom + raw integral of the density, before normalization.
  double raw_mass = 0.0;
};

inline const std::vector<double>& default_eta_ladder() {
  static const std::vector<double> ladder = {1.0,  0.3,  0.1,  0.03, 0.01,
                                             3e-3, 1e-3, 3e-4, 1e-4};
  return ladder;
}

/// n uniform points on (0, upper].
Vector uniform_grid(Eigen::Index points, double upper);

/// max_ij exp(2 alpha(i) + 2 beta(j)) var(i, j)
double flatness_smax(const Potentials& pot, const Matrix& var);

FluctuationPair fluctuation_matrices(const Matrix& x, const Matrix& lambda,
                                     const Potentials& pot_x,
                                     const Potentials& pot_mean, double s_max);

/// S_ij = exp(2 alpha + 2 beta) var_ij / ((m + n) s_max)
VarianceProfile variance_profile(const Potentials& pot_mean, const Matrix& var,
                                 double s_max);

/// Dyson system for the Gram matrix with variance profile S, solved by damped
/// fixed-point iteration at z = tau + i eta down the eta ladder. Identical
/// rows and columns of S are merged before iterating. Throws LeftHalfPlane if
/// an iterate leaves the upper half plane and NoConvergence (after filling
/// `partial`) if some grid point misses the tolerance.
DysonSolution solve_dyson(const Matrix& S, const Vector& grid,
                          const std::vector<double>& eta_ladder = default_eta_ladder(),
                          double tol = 1e-10, int max_iter = 200000,
                          DysonSolution* partial = nullptr);

/// Marchenko–Pastur eigenvalue density sqrt(4 - t) / (2 pi sqrt(t)) on (0, 4].
double mp_density(double tau);
/// Closed-form distribution function of mp_density.
double mp_cdf(double tau);
/// The same law dilated by `scale` (support (0, 4 scale]).
double mp_density_scaled(double tau, double scale);
double mp_cdf_scaled(double tau, double scale);

/// Eigenvalues of A A^T in ascending order; values above -1e-10 are clamped
/// to be nonnegative.
Vector gram_eigenvalues(const Matrix& a);

/// Cumulative distribution of the solved measure at tau (linear
/// interpolation of the grid cdf; 1 past the grid).
double dyson_cdf(const DysonSolution& sol, double tau);

/// i(tau) = ceil(m cdf(tau)) clamped to [1, m], for each grid point.
std::vector<int> classical_locations(const DysonSolution& sol, Eigen::Index m);

struct RigidityRow {
  double tau = 0.0;
  int index = 0;
  double eigenvalue = 0.0;
  double deviation = 0.0;
  double bound = 0.0;
  bool violation = false;
};

struct RigidityReport {
  double max_dev_in_bulk = 0.0;
  int violations = 0;
  int outside_support = 0;
  int bulk_points = 0;
  std::vector<RigidityRow> rows;
  // Support intervals of the solved density (plus {0} when the atom is
  // positive).
  std::vector<std::pair<double, double>> support;
};

RigidityReport rigidity_report(const Vector& eigs, const DysonSolution& sol, double eps,
                               double Delta, double eps_star, double eps_cov,
                               bool square, double support_threshold = 1e-3);

struct GridFunction {
  Vector grid;
  Vector values;
};

/// f_s(s) = 2 s f(s^2) on the grid s = sqrt(tau).
GridFunction singular_pushforward(const Vector& grid, const Vector& density);

/// |A A^T - A_check A_check^T|_2
double covariance_deviation(const FluctuationPair& pair);

/// Largest singular value by power iteration on B^T B.
double spectral_norm(const Matrix& b, double tol = 1e-10, int max_iter = 5000);

}  // namespace sinkbridge
