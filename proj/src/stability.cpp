#include "sinkbridge/stability.hpp"

#include <algorithm>
#include <cmath>

#include "sinkbridge/spectral.hpp"

namespace sinkbridge {

namespace {

void require_shape(const Matrix& reference, const Vector& p, const Vector& q) {
  if (reference.rows() != p.size() || reference.cols() != q.size()) {
    throw Error(ErrorCode::DimensionMismatch, "reference shape does not match margins");
  }
}

Vector normalized(const Vector& v) { return v / v.sum(); }

}  // namespace

double StabilityConstants::prob_e1_lower() const {
  const double mn = static_cast<double>(std::max(m, n));
  return 1.0 - std::pow(mn, -D);
}

double StabilityConstants::prob_e2_lower() const {
  const double mn = static_cast<double>(std::max(m, n));
  return 1.0 - 2.0 * std::pow(mn, -D);
}

double StabilityConstants::prob_e3_lower() const {
  const double mn = static_cast<double>(std::max(m, n));
  const double denom =
      static_cast<double>(m * n) * sigma * sigma + R * lambda_mass;
  const double bern = 2.0 * std::exp(-(lambda_mass * lambda_mass / 2.0) / denom);
  return 1.0 - std::pow(mn, -D) - bern;
}

double row_alignment(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  const Matrix gram = a * a.transpose();
  return gram.minCoeff() / static_cast<double>(a.cols());
}

double stability_constant_CA(const Matrix& a, const MarginPair& margins) {
  if (a.rows() != margins.rows() || a.cols() != margins.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix and margins differ in shape");
  }
  const double rho = row_alignment(a);
  if (!(rho > 0.0)) {
    throw Error(ErrorCode::ZeroAlignment, "row alignment is zero");
  }
  const double mn = static_cast<double>(a.rows() * a.cols());
  return 1.0 + 9.0 * margins.r.maxCoeff() * margins.c.maxCoeff() / (rho * mn);
}

double concentration_tau(Eigen::Index m, Eigen::Index n, double D) {
  const double mn = static_cast<double>(std::max(m, n));
  return (D + 1.0) * std::log(mn) + std::log(4.0);
}

double spectral_threshold_tD(Eigen::Index m, Eigen::Index n, double sigma, double R,
                             double D) {
  const double mn = static_cast<double>(std::max(m, n));
  const double tau = concentration_tau(m, n, D);
  return sigma * std::sqrt(2.0 * mn * tau) + 2.0 * R * tau;
}

StabilityConstants concentration_constants(const ScalingProblem& problem, double sigma,
                                           double R, double D,
                                           const std::optional<Matrix>& var) {
  problem.validate();
  if (!(D > 0.0)) throw Error(ErrorCode::InvalidArgument, "D must be positive");
  const Matrix& lambda = problem.lambda;
  const MarginPair& mg = problem.margins;
  if ((lambda.array() <= 0.0).any()) {
    throw Error(ErrorCode::ZeroEntry, "concentration constants need a positive mean");
  }

  StabilityConstants k;
  k.m = lambda.rows();
  k.n = lambda.cols();
  k.sigma = sigma;
  k.R = R;
  k.D = D;
  k.K = cost_bound_K(problem);
  k.delta = delta_smoothness(mg);
  k.lambda_min = lambda.minCoeff();
  k.lambda_max = lambda.maxCoeff();
  k.lambda_mass = lambda.sum();

  const auto m = static_cast<double>(k.m);
  const auto n = static_cast<double>(k.n);
  const double mn = std::max(m, n);

  k.tau = concentration_tau(k.m, k.n, D);
  k.t_D = spectral_threshold_tD(k.m, k.n, sigma, R, D);
  k.eps0 = std::exp(2.0 * k.K) * mn / (k.delta * k.lambda_mass) * k.t_D;
  k.C_star = 1.0 + 18.0 * std::exp(8.0 * k.K) * k.lambda_mass * k.lambda_mass /
                       (k.delta * k.delta * k.lambda_min * k.lambda_min * m * m * n * n);
  const double spread = sigma + R + k.lambda_max;
  k.Phi = std::min(n * std::pow(k.lambda_min / spread, 4.0),
                   std::sqrt(n) * k.lambda_min / spread);
  k.eps_pot = 16.0 * k.C_star * k.eps0;

  k.rho_A = row_alignment(lambda);
  k.C_A = stability_constant_CA(lambda, mg);
  k.eps_max = 1.0 / (50.0 * k.C_A * k.C_A);

  if (var) {
    if (var->rows() != lambda.rows() || var->cols() != lambda.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "variance matrix shape mismatch");
    }
    SinkhornOptions opts;
    opts.tol = 1e-12;
    const ScalingResult res = sinkhorn_scale(problem, opts);
    k.s_max = flatness_smax(res.potentials, *var);
    const double N = mg.N;
    k.eps_cov = 3.0 * std::exp(4.0 * k.K) * N * N /
                ((m + n) * k.s_max * k.lambda_mass * k.lambda_mass) * k.eps_pot *
                k.t_D * k.t_D * (2.0 + 3.0 * k.eps_pot);
  }
  return k;
}

PotentialStabilityReport potential_stability_check(const Matrix& a,
                                                   const MarginPair& margins,
                                                   double tol) {
  PotentialStabilityReport rep;
  rep.eps = max_relative_margin_error(a, margins);
  rep.C_A = stability_constant_CA(a, margins);
  rep.eps_max = 1.0 / (50.0 * rep.C_A * rep.C_A);
  rep.within_eps_max = rep.eps < rep.eps_max;
  rep.bound = 4.0 * rep.C_A * rep.eps;

  SinkhornOptions opts;
  opts.tol = tol;
  const ScalingResult res = sinkhorn_scale(ScalingProblem{a, margins}, opts);
  const GaugeAlignment best = minimal_norm_gauge(res.potentials);
  rep.potentials = shift_potentials(res.potentials, -best.t);
  rep.actual = best.distance;
  rep.holds = rep.actual <= rep.bound;
  return rep;
}

Matrix discrete_bridge(const Matrix& reference, const Vector& p, const Vector& q,
                       double tol) {
  require_shape(reference, p, q);
  SinkhornOptions opts;
  opts.tol = tol;
  const MarginPair mg = MarginPair::make(normalized(p), normalized(q));
  return sinkhorn_scale(ScalingProblem{reference / reference.sum(), mg}, opts).rescaled;
}

double cost_sup(const Matrix& reference, const Vector& p, const Vector& q,
                bool positive_part) {
  require_shape(reference, p, q);
  const Matrix rn = reference / reference.sum();
  const Vector pn = normalized(p);
  const Vector qn = normalized(q);
  double sup = 0.0;
  for (Eigen::Index j = 0; j < rn.cols(); ++j) {
    for (Eigen::Index i = 0; i < rn.rows(); ++i) {
      const double prod = pn(i) * qn(j);
      if (prod <= 0.0) continue;
      if (rn(i, j) <= 0.0) {
        throw Error(ErrorCode::UnboundedCost,
                    "reference vanishes where the product of margins is positive");
      }
      const double kappa = -std::log(rn(i, j) / prod);
      sup = std::max(sup, positive_part ? std::max(kappa, 0.0) : std::abs(kappa));
    }
  }
  return sup;
}

double kernel_stability_rhs(const Matrix& reference, const Matrix& reference2,
                            const Vector& p, const Vector& q) {
  const double k1 = cost_sup(reference, p, q, true);
  const double k2 = cost_sup(reference2, p, q, true);
  return std::exp(1.5 * std::max(k1, k2)) * discrete_hellinger(reference, reference2);
}

double margin_stability_rhs(const Matrix& reference, const Vector& p, const Vector& q,
                            const Vector& p2, const Vector& q2) {
  const double k1 = cost_sup(reference, p, q, false);
  const double k2 = cost_sup(reference, p2, q2, false);
  const double l1 = (normalized(p) - normalized(p2)).lpNorm<1>() +
                    (normalized(q) - normalized(q2)).lpNorm<1>();
  return 4.0 * std::max(k1, k2) * l1;
}

double product_margin_ratio_M(const Vector& p, const Vector& q, const Vector& p2,
                              const Vector& q2) {
  const Vector pn = normalized(p);
  const Vector qn = normalized(q);
  const Vector pn2 = normalized(p2);
  const Vector qn2 = normalized(q2);
  // log(p q / p' q') separates, so the extreme is attained at the row and
  // column extremes.
  const Eigen::ArrayXd lr = (pn.array() / pn2.array()).log();
  const Eigen::ArrayXd lc = (qn.array() / qn2.array()).log();
  return std::max(std::abs(lr.maxCoeff() + lc.maxCoeff()),
                  std::abs(lr.minCoeff() + lc.minCoeff()));
}

double total_stability_rhs(const Matrix& reference, const Vector& p, const Vector& q,
                           const Matrix& reference2, const Vector& p2,
                           const Vector& q2) {
  const double k1 = cost_sup(reference, p, q, false);
  const double k2 = cost_sup(reference2, p2, q2, false);
  const double M = product_margin_ratio_M(p, q, p2, q2);
  const double l1 = (normalized(p) - normalized(p2)).lpNorm<1>() +
                    (normalized(q) - normalized(q2)).lpNorm<1>();
  const double dh = discrete_hellinger(reference, reference2);
  return 8.0 * (k1 + M) * l1 + 4.0 * std::exp(3.0 * std::max(k1 + M, k2)) * dh * dh;
}

double deterministic_limit_rhs(double K, double delta, double l1_r, double l1_c,
                               double dH_ref) {
  return 8.0 * (K + 4.0 * std::log(1.0 / delta)) * (l1_r + l1_c) +
         4.0 * std::exp(3.0 * K) * std::pow(delta, -12.0) * dH_ref * dH_ref;
}

ScalabilityProbabilityBound scalability_probability_bound(const MarginPair& margins,
                                                          double p0, double gamma,
                                                          double eta) {
  if (p0 < 0.0 || p0 > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "p0 must lie in [0, 1]");
  }
  const double delta = delta_smoothness(margins);
  const auto m = static_cast<double>(margins.rows());
  const auto n = static_cast<double>(margins.cols());
  const double d3 = delta * delta * delta;
  const double small = std::min(m, n);

  ScalabilityProbabilityBound b;
  if (p0 == 0.0) {
    b.bound1 = 0.0;
  } else {
    b.bound1 = std::exp((m + n - 2.0) * std::log(2.0) + d3 * small / 2.0 * std::log(p0));
  }
  b.threshold = std::exp(-2.0 * std::log(2.0) / d3 * (1.0 + 1.0 / gamma) - eta);
  const bool aspect_ok = small / std::max(m, n) >= gamma;
  b.threshold_holds = aspect_ok && p0 <= b.threshold;
  b.bound_exp = 0.25 * std::exp(-eta * d3 / 2.0 * small);
  return b;
}

}  // namespace sinkbridge
