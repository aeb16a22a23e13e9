#include "sinkbridge/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "sinkbridge/random.hpp"

namespace sinkbridge {

namespace {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;

// Variance profile with identical rows and identical columns merged.
struct CompressedProfile {
  Matrix S;            // classes x classes
  Vector row_weight;   // multiplicities
  Vector col_weight;
  std::vector<int> row_class;
};

std::vector<int> group_identical(const Matrix& rows_as_vectors, double quantum,
                                 std::vector<int>& representatives) {
  std::map<std::vector<long long>, int> seen;
  std::vector<int> cls(rows_as_vectors.rows());
  representatives.clear();
  for (Eigen::Index i = 0; i < rows_as_vectors.rows(); ++i) {
    std::vector<long long> key(rows_as_vectors.cols());
    for (Eigen::Index j = 0; j < rows_as_vectors.cols(); ++j) {
      key[j] = std::llround(rows_as_vectors(i, j) / quantum);
    }
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(representatives.size()));
    if (inserted) representatives.push_back(static_cast<int>(i));
    cls[i] = it->second;
  }
  return cls;
}

CompressedProfile compress(const Matrix& S) {
  const double quantum = std::max(S.maxCoeff(), 1e-300) * 1e-10;
  std::vector<int> row_reps;
  const std::vector<int> row_cls = group_identical(S, quantum, row_reps);
  const auto a = static_cast<Eigen::Index>(row_reps.size());

  // Column vectors restricted to one representative row per class.
  Matrix by_col(S.cols(), a);
  for (Eigen::Index k = 0; k < a; ++k) by_col.col(k) = S.row(row_reps[k]).transpose();
  std::vector<int> col_reps;
  const std::vector<int> col_cls = group_identical(by_col, quantum, col_reps);
  const auto b = static_cast<Eigen::Index>(col_reps.size());

  CompressedProfile cp;
  cp.row_class = row_cls;
  cp.row_weight = Vector::Zero(a);
  cp.col_weight = Vector::Zero(b);
  for (int c : row_cls) cp.row_weight(c) += 1.0;
  for (int c : col_cls) cp.col_weight(c) += 1.0;
  cp.S.resize(a, b);
  for (Eigen::Index k = 0; k < a; ++k) {
    for (Eigen::Index l = 0; l < b; ++l) cp.S(k, l) = S(row_reps[k], col_reps[l]);
  }
  return cp;
}

// One damped fixed-point solve at z; returns the iteration count or -1.
int dyson_point(const CompressedProfile& cp, Complex z, CVector& mv, double tol,
                int max_iter) {
  const Eigen::MatrixXcd S = cp.S.cast<Complex>();
  const CVector wr = cp.row_weight.cast<Complex>();
  const CVector wc = cp.col_weight.cast<Complex>();
  for (int it = 1; it <= max_iter; ++it) {
    const CVector u = CVector::Ones(S.cols()) + S.transpose() * wr.cwiseProduct(mv);
    const CVector self = S * wc.cwiseQuotient(u);
    CVector next(mv.size());
    for (Eigen::Index k = 0; k < mv.size(); ++k) next(k) = -1.0 / (z - self(k));
    const CVector damped = 0.5 * mv + 0.5 * next;
    const double change = (damped - mv).cwiseAbs().maxCoeff();
    mv = damped;
    for (Eigen::Index k = 0; k < mv.size(); ++k) {
      if (!(mv(k).imag() > 0.0)) {
        throw Error(ErrorCode::LeftHalfPlane, "Dyson iterate left the upper half plane");
      }
    }
    if (change <= tol) return it;
  }
  return -1;
}

void fill_cdf(DysonSolution& sol) {
  const Eigen::Index g = sol.grid.size();
  sol.cdf = Vector::Zero(g);
  if (g == 0) return;
  Vector cum(g);
  // First panel integrated as c / sqrt(tau), which is exact for the hard
  // edge of square profiles and negligible otherwise.
  cum(0) = 2.0 * sol.grid(0) * sol.density(0);
  for (Eigen::Index k = 1; k < g; ++k) {
    cum(k) = cum(k - 1) +
             0.5 * (sol.density(k) + sol.density(k - 1)) * (sol.grid(k) - sol.grid(k - 1));
  }
  sol.raw_mass = sol.atom + cum(g - 1);
  const double scale = cum(g - 1) > 0.0 ? (1.0 - sol.atom) / cum(g - 1) : 0.0;
  sol.cdf = Vector::Constant(g, sol.atom) + scale * cum;
}

}  // namespace

Vector uniform_grid(Eigen::Index points, double upper) {
  Vector g(points);
  for (Eigen::Index k = 0; k < points; ++k) {
    g(k) = upper * static_cast<double>(k + 1) / static_cast<double>(points);
  }
  return g;
}

double flatness_smax(const Potentials& pot, const Matrix& var) {
  if (var.rows() != pot.alpha.size() || var.cols() != pot.beta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "variance matrix does not match potentials");
  }
  double best = 0.0;
  for (Eigen::Index j = 0; j < var.cols(); ++j) {
    for (Eigen::Index i = 0; i < var.rows(); ++i) {
      best = std::max(best, std::exp(2.0 * pot.alpha(i) + 2.0 * pot.beta(j)) * var(i, j));
    }
  }
  return best;
}

FluctuationPair fluctuation_matrices(const Matrix& x, const Matrix& lambda,
                                     const Potentials& pot_x,
                                     const Potentials& pot_mean, double s_max) {
  if (x.rows() != lambda.rows() || x.cols() != lambda.cols() ||
      pot_x.alpha.size() != x.rows() || pot_x.beta.size() != x.cols() ||
      pot_mean.alpha.size() != x.rows() || pot_mean.beta.size() != x.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "fluctuation inputs differ in shape");
  }
  if (!(s_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "s_max must be positive");
  const double pre = 1.0 / std::sqrt(static_cast<double>(x.rows() + x.cols()) * s_max);
  const Matrix centered = x - lambda;
  auto scaled = [&](const Potentials& p) {
    const Vector ea = p.alpha.array().exp();
    const Vector eb = p.beta.array().exp();
    return Matrix(pre * ea.asDiagonal() * centered * eb.asDiagonal());
  };
  return {scaled(pot_x), scaled(pot_mean)};
}

VarianceProfile variance_profile(const Potentials& pot_mean, const Matrix& var,
                                 double s_max) {
  if (var.rows() != pot_mean.alpha.size() || var.cols() != pot_mean.beta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "variance matrix does not match potentials");
  }
  const auto mn = static_cast<double>(var.rows() + var.cols());
  VarianceProfile vp;
  vp.s_max = s_max;
  vp.S.resize(var.rows(), var.cols());
  for (Eigen::Index j = 0; j < var.cols(); ++j) {
    for (Eigen::Index i = 0; i < var.rows(); ++i) {
      vp.S(i, j) =
          std::exp(2.0 * pot_mean.alpha(i) + 2.0 * pot_mean.beta(j)) * var(i, j) / (mn * s_max);
    }
  }
  if (vp.S.maxCoeff() > 1.0 / mn + 1e-12) {
    throw Error(ErrorCode::FlatnessViolated, "variance profile exceeds 1/(m+n)");
  }
  return vp;
}

DysonSolution solve_dyson(const Matrix& S, const Vector& grid,
                          const std::vector<double>& eta_ladder, double tol, int max_iter,
                          DysonSolution* partial) {
  if (S.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty variance profile");
  if ((S.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "variance profile must be nonnegative");
  }
  if (eta_ladder.empty()) throw Error(ErrorCode::InvalidArgument, "empty eta ladder");
  for (std::size_t k = 0; k < eta_ladder.size(); ++k) {
    if (!(eta_ladder[k] > 0.0) || (k > 0 && !(eta_ladder[k] < eta_ladder[k - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "eta ladder must be positive and decreasing");
    }
  }
  if (eta_ladder.back() < 1e-5) {
    throw Error(ErrorCode::InvalidArgument, "final eta must be at least 1e-5");
  }
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!(grid(k) > 0.0) || (k > 0 && !(grid(k) > grid(k - 1)))) {
      throw Error(ErrorCode::InvalidArgument, "grid must be positive and increasing");
    }
  }

  const auto m = static_cast<double>(S.rows());
  const auto n = static_cast<double>(S.cols());
  const CompressedProfile cp = compress(S);

  DysonSolution sol;
  sol.grid = grid;
  sol.density = Vector::Zero(grid.size());
  sol.atom = std::max(0.0, 1.0 - n / m);
  sol.stieltjes.assign(grid.size(), Complex(0.0, 0.0));
  sol.eta_final = eta_ladder.back();

  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double tau = grid(k);
    CVector mv = CVector::Constant(cp.S.rows(), -1.0 / Complex(tau, eta_ladder.front()));
    bool point_ok = true;
    for (double eta : eta_ladder) {
      if (dyson_point(cp, Complex(tau, eta), mv, tol, max_iter) < 0) point_ok = false;
    }
    if (!point_ok) {
      sol.converged = false;
      ++sol.unconverged_points;
    }
    const Complex mbar = mv.cwiseProduct(cp.row_weight.cast<Complex>()).sum() / m;
    sol.stieltjes[k] = mbar;
    const double eta = sol.eta_final;
    const double atom_part = sol.atom * eta / (std::numbers::pi * (tau * tau + eta * eta));
    sol.density(k) = std::max(0.0, mbar.imag() / std::numbers::pi - atom_part);
  }
  fill_cdf(sol);

  if (!sol.converged) {
    if (partial) *partial = sol;
    throw Error(ErrorCode::NoConvergence,
                std::to_string(sol.unconverged_points) + " grid points did not converge");
  }
  return sol;
}

double mp_density(double tau) {
  if (!(tau > 0.0) || tau > 4.0) return 0.0;
  return std::sqrt(4.0 - tau) / (2.0 * std::numbers::pi * std::sqrt(tau));
}

double mp_cdf(double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 4.0) return 1.0;
  const double theta = std::asin(std::sqrt(tau) / 2.0);
  return 2.0 / std::numbers::pi * (theta + std::sin(theta) * std::cos(theta));
}

double mp_density_scaled(double tau, double scale) {
  return mp_density(tau / scale) / scale;
}

double mp_cdf_scaled(double tau, double scale) { return mp_cdf(tau / scale); }

Vector gram_eigenvalues(const Matrix& a) {
  const Matrix gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigensolverFailure, "symmetric eigensolver failed");
  }
  Vector eig = solver.eigenvalues();
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    if (eig(k) < 0.0 && eig(k) >= -1e-10) eig(k) = 0.0;
  }
  return eig;
}

double dyson_cdf(const DysonSolution& sol, double tau) {
  if (tau < 0.0) return 0.0;
  const Eigen::Index g = sol.grid.size();
  if (g == 0) return 1.0;
  if (tau >= sol.grid(g - 1)) return 1.0;
  if (tau <= sol.grid(0)) {
    return sol.atom + (sol.cdf(0) - sol.atom) * std::sqrt(tau / sol.grid(0));
  }
  const auto it = std::upper_bound(sol.grid.data(), sol.grid.data() + g, tau);
  const auto hi = static_cast<Eigen::Index>(it - sol.grid.data());
  const Eigen::Index lo = hi - 1;
  const double w = (tau - sol.grid(lo)) / (sol.grid(hi) - sol.grid(lo));
  return (1.0 - w) * sol.cdf(lo) + w * sol.cdf(hi);
}

std::vector<int> classical_locations(const DysonSolution& sol, Eigen::Index m) {
  std::vector<int> idx(sol.grid.size());
  const auto md = static_cast<double>(m);
  for (Eigen::Index k = 0; k < sol.grid.size(); ++k) {
    const double v = std::ceil(md * sol.cdf(k) - 1e-9);
    idx[k] = static_cast<int>(std::clamp(v, 1.0, md));
  }
  return idx;
}

RigidityReport rigidity_report(const Vector& eigs, const DysonSolution& sol, double eps,
                               double Delta, double eps_star, double eps_cov,
                               bool square, double support_threshold) {
  RigidityReport rep;
  const Eigen::Index m = eigs.size();
  const auto md = static_cast<double>(m);
  const std::vector<int> idx = classical_locations(sol, m);
  const double base = std::pow(md, eps) / md;

  for (Eigen::Index k = 0; k < sol.grid.size(); ++k) {
    const double tau = sol.grid(k);
    if (tau > 4.0) continue;
    if (!square && tau <= Delta) continue;
    if (sol.density(k) < eps_star) continue;
    RigidityRow row;
    row.tau = tau;
    row.index = idx[k];
    row.eigenvalue = eigs(idx[k] - 1);
    row.deviation = std::abs(row.eigenvalue - tau);
    row.bound = square ? base * (std::sqrt(tau) + 1.0 / md) + eps_cov : base + eps_cov;
    row.violation = row.deviation >= row.bound;
    rep.max_dev_in_bulk = std::max(rep.max_dev_in_bulk, row.deviation);
    if (row.violation) ++rep.violations;
    ++rep.bulk_points;
    rep.rows.push_back(row);
  }

  if (sol.atom > 0.0) rep.support.emplace_back(0.0, 0.0);
  const Eigen::Index g = sol.grid.size();
  for (Eigen::Index k = 0; k < g;) {
    if (sol.density(k) <= support_threshold) {
      ++k;
      continue;
    }
    Eigen::Index e = k;
    while (e + 1 < g && sol.density(e + 1) > support_threshold) ++e;
    const double lo = k == 0 ? 0.0 : sol.grid(k);
    rep.support.emplace_back(lo, sol.grid(e));
    k = e + 1;
  }

  for (Eigen::Index k = 0; k < m; ++k) {
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& [lo, hi] : rep.support) {
      const double d = eigs(k) < lo ? lo - eigs(k) : (eigs(k) > hi ? eigs(k) - hi : 0.0);
      dist = std::min(dist, d);
    }
    if (dist >= eps_star + eps_cov) ++rep.outside_support;
  }
  return rep;
}

GridFunction singular_pushforward(const Vector& grid, const Vector& density) {
  if (grid.size() != density.size()) {
    throw Error(ErrorCode::DimensionMismatch, "grid and density differ in length");
  }
  GridFunction out;
  out.grid = grid.array().sqrt();
  out.values = 2.0 * out.grid.array() * density.array();
  return out;
}

double covariance_deviation(const FluctuationPair& pair) {
  const Matrix diff = pair.A * pair.A.transpose() - pair.A_check * pair.A_check.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(diff, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigensolverFailure, "symmetric eigensolver failed");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& b, double tol, int max_iter) {
  if (b.size() == 0) return 0.0;
  Philox rng(0x5eed, 0);
  Vector v(b.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = 1.0 + 0.1 * rng.uniform();
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector bv = b * v;
    const double next = bv.norm();
    if (next == 0.0) return 0.0;
    Vector w = b.transpose() * bv;
    v = w / w.norm();
    if (std::abs(next - sigma) <= tol * next) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace sinkbridge
