#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sinkbridge/ensembles.hpp"
#include "sinkbridge/measures.hpp"
#include "sinkbridge/spectral.hpp"
#include "sinkbridge/stability.hpp"

namespace sinkbridge {

/// Runs fn(0..count-1) on up to `workers` threads and returns the results in
/// index order. The first exception by index is rethrown after all threads
/// join, so the outcome does not depend on scheduling.
template <class T>
std::vector<T> parallel_map(int count, int workers, const std::function<T(int)>& fn) {
  std::vector<std::optional<T>> slots(static_cast<std::size_t>(std::max(count, 0)));
  std::vector<std::exception_ptr> errors(slots.size());
  std::atomic<int> next{0};
  auto run = [&] {
    for (int k = next++; k < count; k = next++) {
      try {
        slots[k].emplace(fn(k));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(workers, count));
  if (threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

int default_workers();

// ---------------------------------------------------------------- CLT

struct CltModel {
  Matrix L;
  Matrix L_dagger;
  // Diagonal of Sigma = Cov(vec X), column-major over (i, j).
  Vector sigma_diag;
  // Covariance of the potentials in the kernel-orthogonal gauge.
  Matrix theory_cov;
  // The same covariance moved to the beta-c-weighted gauge.
  Matrix theory_cov_gauged;
  Potentials potentials;
  Matrix rescaled;

  /// H vec(delta) = (row sums; column sums) of D(e^alpha) delta D(e^beta).
  Vector apply_H(const Matrix& delta) const;
  /// Projection onto the beta-c-weighted gauge along (-1_m, 1_n).
  Vector to_gauged(const Vector& v) const;
  Vector c;  // column margins, used by to_gauged
  double N = 0.0;
};

CltModel clt_covariance(const ScalingProblem& problem, const Matrix& var);

struct CltConfig {
  Matrix lambda;
  MarginPair margins;
  DistKind dist = DistKind::Poisson;
  std::int64_t M = 20000;
  int replicates = 500;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct CltReport {
  std::int64_t M = 0;
  int replicates = 0;
  int failed = 0;
  Matrix empirical_cov;
  Matrix theory_cov;
  // |C_emp - C_theory|_F / |C_theory|_F
  double rel_frobenius = 0.0;
  // Same with the linearized deviation used as a control variate.
  double rel_frobenius_cv = 0.0;
  // max over replicates of |<beta deviation, c>| / N
  double max_gauge_residual = 0.0;
  // Per coordinate, standardized by the theoretical variance.
  Vector skewness;
  Vector excess_kurtosis;
  Vector ks_normal;
  // One row per successful replicate: sqrt(M) (alpha dev; beta dev).
  Matrix deviations;
};

CltReport run_clt_experiment(const CltConfig& cfg);

struct CltSweepRow {
  std::int64_t M = 0;
  int replicates = 0;
  double rel_frobenius = 0.0;
  double rel_frobenius_cv = 0.0;
};

std::vector<CltSweepRow> run_clt_sweep(const CltConfig& base,
                                       const std::vector<std::int64_t>& Ms,
                                       const std::vector<int>& replicates);

// ------------------------------------------------------ concentration

using MatrixSampler = std::function<Matrix(const Matrix& lambda, int trial)>;

struct ConcentrationConfig {
  ExperimentConfig base;
  double D = 1.0;
  int workers = 1;
  double sinkhorn_tol = 1e-10;
  int sinkhorn_max_iter = 20000;
  // Replaces the entry sampler when set (used for degenerate injections).
  MatrixSampler sampler;
};

struct ConcentrationTrial {
  int trial = 0;
  bool scalable = true;
  int iterations = 0;
  double margin_error = 0.0;
  double gauge_distance = 0.0;
  bool e1 = false;
  // |D(e^aX)(X - L)D(e^bX) - D(e^a)(X - L)D(e^b)|_2, raw and divided by N.
  double e2_dev_raw = 0.0;
  double e2_dev = 0.0;
  bool e2 = false;
  double e3_dev = 0.0;
  bool e3 = false;
  double noise_norm = 0.0;
  bool noise_ok = false;
  bool mass_ok = false;
  // |A A^T - A_check A_check^T|_2 against eps_cov on E2 and the noise event.
  double cov_dev = 0.0;
  bool cov_checked = false;
  bool cov_ok = true;
};

struct ConcentrationReport {
  StabilityConstants constants;
  double e1_bound = 0.0;
  double e2_bound = 0.0;
  double e3_bound = 0.0;
  std::vector<ConcentrationTrial> trials;
  int failed = 0;
  double median_gauge_distance = 0.0;
  double freq_e1 = 0.0;
  double freq_e2 = 0.0;
  double freq_e3 = 0.0;
  // Trials where a deterministic consequence failed although its event held;
  // only assessed when eps0 <= 1 / (50 C_star^2).
  int joint_violations = 0;
};

ConcentrationReport run_concentration_experiment(const ConcentrationConfig& cfg);

// ------------------------------------------------------ test functions

struct TestFunctionTrial {
  int trial = 0;
  bool scalable = true;
  double lhs = 0.0;
  bool holds = false;
};

struct TestFunctionReport {
  std::string g_name;
  StabilityConstants constants;
  double rhs = 0.0;
  std::vector<TestFunctionTrial> trials;
  int failed = 0;
  double freq_holds = 0.0;
  double mean_lhs = 0.0;
};

TestFunctionReport run_test_function_experiment(const ConcentrationConfig& cfg,
                                                const std::string& g_name);

/// 2 |g| eps_pot e^{2K} + |g| e^{2K} / |Lambda|_1 (sigma sqrt(2 m n tau) + 2 R tau)
double test_function_rhs(const StabilityConstants& k, double g_sup);

// --------------------------------------------------------------- ESD

struct EsdConfig {
  ExperimentConfig base;
  Eigen::Index grid_points = 400;
  double grid_upper = 4.2;
  std::vector<double> eta_ladder = default_eta_ladder();
  int bins = 50;
  double rigidity_eps = 0.1;
  double Delta = 0.05;
  double eps_star = 0.05;
  double D = 1.0;
  double sinkhorn_tol = 1e-10;
};

struct Histogram {
  Vector edges;   // bins + 1
  Vector density; // normalized to unit integral over the edges
};

struct EsdReport {
  Vector eigenvalues;
  VarianceProfile profile;
  DysonSolution dyson;
  GridFunction singular_density;
  Histogram eigen_histogram;
  Histogram singular_histogram;
  // Marchenko–Pastur law dilated to the trace of the profile (n mean(S)).
  double mp_scale = 1.0;
  double ks_to_mp = 0.0;
  double ks_to_dyson = 0.0;
  // sum over bins |empirical mass - predicted mass|
  double l1_hist_vs_dyson = 0.0;
  // sup over grid points tau >= 0.05 of |dyson density - scaled MP density|
  double sup_dyson_vs_mp = 0.0;
  double eps_cov = 0.0;
  double cov_dev = 0.0;
  double singular_hist_mass = 0.0;
  RigidityReport rigidity;
};

EsdReport run_esd_experiment(const EsdConfig& cfg);

/// sup |F_emp - F| over the jump points of the sorted sample.
double ks_distance(const Vector& sorted, const std::function<double(double)>& cdf);

Histogram make_histogram(const Vector& values, double lo, double hi, int bins);

// -------------------------------------------------- deterministic limit

enum class LimitShape { Constant, LinearRamp, Gaussian };

const char* to_string(LimitShape s);
LimitShape limit_shape_from_string(const std::string& name);

struct LimitSpec {
  LimitShape row_margin = LimitShape::LinearRamp;
  LimitShape col_margin = LimitShape::LinearRamp;
  // Ramp densities are 1 + slope (x - 1/2).
  double row_slope = 0.8;
  double col_slope = -0.6;
  // Kernel: Constant or Gaussian exp(-(x - y)^2 / (2 h^2)).
  LimitShape kernel = LimitShape::Gaussian;
  double bandwidth = 0.5;
  int k_min = 3;
  int k_max = 6;
  int ref_level = 8;
};

struct LimitRow {
  int k = 0;
  Eigen::Index size = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double l1_r = 0.0;
  double l1_c = 0.0;
  double dH_ref = 0.0;
  bool holds = false;
};

struct LimitReport {
  double K = 0.0;
  double delta = 1.0;
  std::vector<LimitRow> rows;
  bool all_hold = true;
  bool lhs_decreasing = true;
};

LimitReport run_deterministic_limit_experiment(const LimitSpec& spec);

// ------------------------------------------------------ inequality sweeps

struct InequalityRecord {
  int instance = 0;
  std::string kind;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct SweepReport {
  std::vector<InequalityRecord> records;
  int violations = 0;
  int skipped = 0;
};

/// Kernel, margin and total stability on random instances of size 4..12.
SweepReport run_stability_sweep(int instances, std::uint64_t seed, int workers = 1);
/// Potential stability at the minimal-norm gauge on perturbed exact scalings.
SweepReport run_potential_sweep(int instances, std::uint64_t seed, int workers = 1);
/// d_H^2 <= |p - q|_1 <= 2 sqrt(2) d_H on random grid densities.
SweepReport run_sandwich_sweep(int instances, std::uint64_t seed);
/// Sinkhorn potentials inside potential_bounds.
SweepReport run_containment_sweep(int instances, std::uint64_t seed, int workers = 1);

struct ScalabilityAgreement {
  int instances = 0;
  int agree = 0;
  int exact_scalable = 0;
  std::vector<int> disagreeing;
};

/// Exact verdicts on random 3x3 zero patterns with random positive margins
/// against Sinkhorn convergence.
ScalabilityAgreement run_scalability_agreement(int instances, std::uint64_t seed);

}  // namespace sinkbridge
