#include "sinkbridge/experiments.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sinkbridge {

namespace {

// Purposes mixed into per-trial stream ids.
constexpr std::uint64_t kSampleStream = 0x51;
constexpr std::uint64_t kCltStream = 0xc1;

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Matrix sample_covariance(const Matrix& rows) {
  const Eigen::Index k = rows.rows();
  if (k < 2) return Matrix::Zero(rows.cols(), rows.cols());
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Matrix centered = rows.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(k - 1);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Matrix exp_outer(const Potentials& p) {
  const Vector ea = p.alpha.array().exp();
  const Vector eb = p.beta.array().exp();
  return ea * eb.transpose();
}

double operator_norm(const Matrix& b) {
  if (b.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(b);
  return svd.singularValues()(0);
}

SinkhornOptions tight_options(double tol, int max_iter) {
  SinkhornOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.gauge = Gauge::BetaCWeighted;
  return o;
}

}  // namespace

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------- CLT

Vector CltModel::apply_H(const Matrix& delta) const {
  const Matrix w = exp_outer(potentials).cwiseProduct(delta);
  Vector out(w.rows() + w.cols());
  out << w.rowwise().sum(), w.colwise().sum().transpose();
  return out;
}

Vector CltModel::to_gauged(const Vector& v) const {
  const Eigen::Index n = c.size();
  const Eigen::Index m = v.size() - n;
  const double s = c.dot(v.tail(n)) / N;
  Vector out = v;
  out.head(m).array() += s;
  out.tail(n).array() -= s;
  return out;
}

CltModel clt_covariance(const ScalingProblem& problem, const Matrix& var) {
  problem.validate();
  const Eigen::Index m = problem.lambda.rows();
  const Eigen::Index n = problem.lambda.cols();
  if (var.rows() != m || var.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "variance matrix does not match the problem");
  }
  if ((problem.lambda.array() <= 0.0).any()) {
    throw Error(ErrorCode::ZeroEntry, "the covariance model needs a positive mean matrix");
  }
  const ScalingResult res = sinkhorn_scale(problem, tight_options(1e-13, 1000000));

  CltModel model;
  model.potentials = res.potentials;
  model.rescaled = res.rescaled;
  model.c = problem.margins.c;
  model.N = problem.margins.N;

  const Eigen::Index d = m + n;
  model.L = Matrix::Zero(d, d);
  model.L.diagonal().head(m) = problem.margins.r;
  model.L.diagonal().tail(n) = problem.margins.c;
  model.L.topRightCorner(m, n) = res.rescaled;
  model.L.bottomLeftCorner(n, m) = res.rescaled.transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.L);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::EigensolverFailure, "eigendecomposition of L failed");
  }
  const Vector& ev = eig.eigenvalues();
  const double cutoff = ev.cwiseAbs().maxCoeff() * static_cast<double>(d) * 1e-12;
  Vector inv = Vector::Zero(d);
  int kernel = 0;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (std::abs(ev(k)) <= cutoff) {
      ++kernel;
    } else {
      inv(k) = 1.0 / ev(k);
    }
  }
  if (kernel != 1) {
    throw Error(ErrorCode::RankDeficiencyUnexpected,
                "L has a kernel of dimension " + std::to_string(kernel));
  }
  model.L_dagger = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();

  const Matrix w = exp_outer(res.potentials);
  model.sigma_diag = Eigen::Map<const Vector>(var.data(), var.size());
  Matrix G = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = var(i, j) * w(i, j) * w(i, j);
      G(i, i) += v;
      G(m + j, m + j) += v;
      G(i, m + j) += v;
      G(m + j, i) += v;
    }
  }
  model.theory_cov = model.L_dagger * G * model.L_dagger;
  model.theory_cov = 0.5 * (model.theory_cov + model.theory_cov.transpose()).eval();

  Matrix P = Matrix::Identity(d, d);
  for (Eigen::Index k = 0; k < d; ++k) P.col(k) = model.to_gauged(P.col(k));
  model.theory_cov_gauged = P * model.theory_cov * P.transpose();
  return model;
}

CltReport run_clt_experiment(const CltConfig& cfg) {
  const ScalingProblem problem{cfg.lambda, cfg.margins};
  const Matrix var = variance_matrix(cfg.lambda, cfg.dist);
  const CltModel model = clt_covariance(problem, var);
  const Eigen::Index m = cfg.lambda.rows();
  const Eigen::Index n = cfg.lambda.cols();
  const double root_M = std::sqrt(static_cast<double>(cfg.M));

  struct Replicate {
    bool ok = false;
    Vector dev;
    Vector dev_lin;
    double gauge_residual = 0.0;
  };

  const auto reps = parallel_map<Replicate>(cfg.replicates, cfg.workers, [&](int r) {
    Replicate out;
    const Matrix xbar = sample_mean_matrix(cfg.lambda, cfg.dist, cfg.M, cfg.seed,
                                           derive_stream(static_cast<std::uint64_t>(r), kCltStream));
    try {
      const ScalingResult res =
          sinkhorn_scale({xbar, cfg.margins}, tight_options(1e-13, 1000000));
      Vector dev(m + n);
      dev << res.potentials.alpha - model.potentials.alpha,
          res.potentials.beta - model.potentials.beta;
      out.dev = root_M * dev;
      out.dev_lin = -root_M * model.to_gauged(model.L_dagger * model.apply_H(xbar - cfg.lambda));
      out.gauge_residual = std::abs(cfg.margins.c.dot(dev.tail(n))) / cfg.margins.N;
      out.ok = true;
    } catch (const Error&) {
      out.ok = false;
    }
    return out;
  });

  CltReport rep;
  rep.M = cfg.M;
  rep.replicates = cfg.replicates;
  std::vector<const Replicate*> good;
  for (const auto& r : reps) {
    if (r.ok) {
      good.push_back(&r);
    } else {
      ++rep.failed;
    }
  }
  const auto k = static_cast<Eigen::Index>(good.size());
  rep.deviations.resize(k, m + n);
  Matrix lin(k, m + n);
  for (Eigen::Index i = 0; i < k; ++i) {
    rep.deviations.row(i) = good[i]->dev.transpose();
    lin.row(i) = good[i]->dev_lin.transpose();
    rep.max_gauge_residual = std::max(rep.max_gauge_residual, good[i]->gauge_residual);
  }
  rep.theory_cov = model.theory_cov_gauged;
  rep.empirical_cov = sample_covariance(rep.deviations);
  const double tn = rep.theory_cov.norm();
  rep.rel_frobenius = (rep.empirical_cov - rep.theory_cov).norm() / tn;
  const Matrix cv = rep.empirical_cov - sample_covariance(lin) + rep.theory_cov;
  rep.rel_frobenius_cv = (cv - rep.theory_cov).norm() / tn;

  const Eigen::Index d = m + n;
  rep.skewness = Vector::Zero(d);
  rep.excess_kurtosis = Vector::Zero(d);
  rep.ks_normal = Vector::Zero(d);
  for (Eigen::Index c = 0; c < d && k > 0; ++c) {
    const double sd = std::sqrt(std::max(rep.theory_cov(c, c), 0.0));
    if (!(sd > 0.0)) continue;
    Vector z = rep.deviations.col(c) / sd;
    const double mu = z.mean();
    const Eigen::ArrayXd cz = z.array() - mu;
    const double m2 = cz.square().mean();
    rep.skewness(c) = cz.cube().mean() / std::pow(m2, 1.5);
    rep.excess_kurtosis(c) = cz.square().square().mean() / (m2 * m2) - 3.0;
    std::sort(z.data(), z.data() + z.size());
    rep.ks_normal(c) = ks_distance(z, normal_cdf);
  }
  return rep;
}

std::vector<CltSweepRow> run_clt_sweep(const CltConfig& base,
                                       const std::vector<std::int64_t>& Ms,
                                       const std::vector<int>& replicates) {
  if (Ms.size() != replicates.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one replicate count per M is required");
  }
  std::vector<CltSweepRow> rows;
  for (std::size_t k = 0; k < Ms.size(); ++k) {
    CltConfig cfg = base;
    cfg.M = Ms[k];
    cfg.replicates = replicates[k];
    cfg.seed = derive_stream(base.seed, static_cast<std::uint64_t>(Ms[k]));
    const CltReport r = run_clt_experiment(cfg);
    rows.push_back({cfg.M, cfg.replicates, r.rel_frobenius, r.rel_frobenius_cv});
  }
  return rows;
}

// ------------------------------------------------------ concentration

namespace {

struct ConcentrationSetup {
  ConfigMatrices cm;
  Matrix var;
  StabilityConstants constants;
  Potentials pot;
  Matrix rescaled;
};

ConcentrationSetup prepare(const ConcentrationConfig& cfg) {
  ConcentrationSetup s;
  s.cm = build_config_matrices(cfg.base);
  s.var = variance_matrix(s.cm.lambda, cfg.base.dist);
  const SubExpParams se = subexp_params(cfg.base.dist, s.cm.lambda.maxCoeff());
  const ScalingProblem problem{s.cm.lambda, s.cm.margins};
  s.constants = concentration_constants(problem, se.sigma, se.R, cfg.D, s.var);
  const ScalingResult res = sinkhorn_scale(problem, tight_options(1e-12, 1000000));
  s.pot = res.potentials;
  s.rescaled = res.rescaled;
  return s;
}

Matrix draw(const ConcentrationConfig& cfg, const Matrix& lambda, int trial) {
  if (cfg.sampler) return cfg.sampler(lambda, trial);
  return sample_matrix(lambda, cfg.base.dist, cfg.base.seed,
                       derive_stream(static_cast<std::uint64_t>(trial), kSampleStream));
}

}  // namespace

ConcentrationReport run_concentration_experiment(const ConcentrationConfig& cfg) {
  const ConcentrationSetup s = prepare(cfg);
  const StabilityConstants& k = s.constants;
  const double e2k = std::exp(2.0 * k.K);
  const double N = s.cm.margins.N;

  ConcentrationReport rep;
  rep.constants = k;
  rep.e1_bound = 4.0 * k.C_star * k.eps0;
  rep.e2_bound = 3.0 * e2k * k.eps_pot * k.t_D / k.lambda_mass;
  rep.e3_bound = 2.0 * k.eps_pot * e2k;
  const Matrix w = exp_outer(s.pot);

  rep.trials = parallel_map<ConcentrationTrial>(cfg.base.trials, cfg.workers, [&](int t) {
    ConcentrationTrial tr;
    tr.trial = t;
    const Matrix x = draw(cfg, s.cm.lambda, t);
    const Matrix noise = x - s.cm.lambda;
    tr.noise_norm = operator_norm(noise);
    tr.noise_ok = tr.noise_norm <= k.t_D;
    tr.mass_ok = x.sum() <= 2.0 * k.lambda_mass;
    ScalingResult res;
    try {
      res = sinkhorn_scale({x, s.cm.margins},
                           tight_options(cfg.sinkhorn_tol, cfg.sinkhorn_max_iter));
    } catch (const Error&) {
      tr.scalable = false;
      return tr;
    }
    tr.iterations = res.iterations;
    tr.margin_error = res.final_margin_error;
    tr.gauge_distance = gauge_distance(res.potentials, s.pot);
    tr.e1 = tr.gauge_distance <= rep.e1_bound;

    const Matrix wx = exp_outer(res.potentials);
    tr.e2_dev_raw = operator_norm((wx - w).cwiseProduct(noise));
    tr.e2_dev = tr.e2_dev_raw / N;
    tr.e2 = tr.e2_dev <= rep.e2_bound;

    const Matrix hat = w.cwiseProduct(x);
    tr.e3_dev = (res.rescaled - hat).lpNorm<1>() / N;
    tr.e3 = tr.e3_dev <= rep.e3_bound;

    const FluctuationPair pair =
        fluctuation_matrices(x, s.cm.lambda, res.potentials, s.pot, k.s_max);
    tr.cov_dev = covariance_deviation(pair);
    tr.cov_checked = tr.e2 && tr.noise_ok;
    tr.cov_ok = !tr.cov_checked || tr.cov_dev <= k.eps_cov;
    return tr;
  });

  std::vector<double> gd;
  int n1 = 0, n2 = 0, n3 = 0;
  for (const auto& tr : rep.trials) {
    if (!tr.scalable) {
      ++rep.failed;
      continue;
    }
    gd.push_back(tr.gauge_distance);
    n1 += tr.e1;
    n2 += tr.e2;
    n3 += tr.e3;
    if (k.eps0_condition()) {
      if ((tr.e1 && tr.noise_ok && !tr.e2) || (tr.e1 && tr.mass_ok && !tr.e3) || !tr.cov_ok) {
        ++rep.joint_violations;
      }
    }
  }
  const double total = static_cast<double>(rep.trials.size() - rep.failed);
  rep.median_gauge_distance = median(gd);
  if (total > 0) {
    rep.freq_e1 = n1 / total;
    rep.freq_e2 = n2 / total;
    rep.freq_e3 = n3 / total;
  }
  return rep;
}

// ------------------------------------------------------ test functions

double test_function_rhs(const StabilityConstants& k, double g_sup) {
  const double e2k = std::exp(2.0 * k.K);
  const auto mn = static_cast<double>(k.m * k.n);
  return 2.0 * g_sup * k.eps_pot * e2k +
         g_sup * e2k / k.lambda_mass * (k.sigma * std::sqrt(2.0 * mn * k.tau) + 2.0 * k.R * k.tau);
}

TestFunctionReport run_test_function_experiment(const ConcentrationConfig& cfg,
                                                const std::string& g_name) {
  const TestFunction g = test_function(g_name);
  const ConcentrationSetup s = prepare(cfg);
  const double N = s.cm.margins.N;
  const GridDensity2D phi_mean = kernel_density_2d(s.rescaled, N);
  const double mean_integral = integrate_test(g.g, phi_mean);

  TestFunctionReport rep;
  rep.g_name = g.name;
  rep.constants = s.constants;
  rep.rhs = test_function_rhs(s.constants, g.sup_norm);
  rep.trials = parallel_map<TestFunctionTrial>(cfg.base.trials, cfg.workers, [&](int t) {
    TestFunctionTrial tr;
    tr.trial = t;
    const Matrix x = draw(cfg, s.cm.lambda, t);
    try {
      const ScalingResult res = sinkhorn_scale(
          {x, s.cm.margins}, tight_options(cfg.sinkhorn_tol, cfg.sinkhorn_max_iter));
      tr.lhs = std::abs(integrate_test(g.g, kernel_density_2d(res.rescaled, N)) - mean_integral);
      tr.holds = tr.lhs <= rep.rhs;
    } catch (const Error&) {
      tr.scalable = false;
    }
    return tr;
  });

  int holds = 0;
  double sum = 0.0;
  for (const auto& tr : rep.trials) {
    if (!tr.scalable) {
      ++rep.failed;
      continue;
    }
    holds += tr.holds;
    sum += tr.lhs;
  }
  const double total = static_cast<double>(rep.trials.size() - rep.failed);
  if (total > 0) {
    rep.freq_holds = holds / total;
    rep.mean_lhs = sum / total;
  }
  return rep;
}

// --------------------------------------------------------------- ESD

double ks_distance(const Vector& sorted, const std::function<double(double)>& cdf) {
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (Eigen::Index k = 0; k < sorted.size(); ++k) {
    const double f = cdf(sorted(k));
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

Histogram make_histogram(const Vector& values, double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw Error(ErrorCode::InvalidArgument, "bad histogram range");
  Histogram h;
  h.edges = Vector::LinSpaced(bins + 1, lo, hi);
  h.density = Vector::Zero(bins);
  const double width = (hi - lo) / bins;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    const double v = values(k);
    if (v < lo || v > hi) continue;
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    h.density(b) += 1.0;
  }
  if (values.size() > 0) h.density /= static_cast<double>(values.size()) * width;
  return h;
}

EsdReport run_esd_experiment(const EsdConfig& cfg) {
  const ConfigMatrices cm = build_config_matrices(cfg.base);
  const Eigen::Index m = cfg.base.m;
  const Eigen::Index n = cfg.base.n;
  const ScalingProblem problem{cm.lambda, cm.margins};
  const Matrix var = variance_matrix(cm.lambda, cfg.base.dist);
  const SubExpParams se = subexp_params(cfg.base.dist, cm.lambda.maxCoeff());
  const StabilityConstants k = concentration_constants(problem, se.sigma, se.R, cfg.D, var);
  const ScalingResult mean_res = sinkhorn_scale(problem, tight_options(1e-12, 1000000));

  EsdReport rep;
  rep.eps_cov = k.eps_cov;
  rep.profile = variance_profile(mean_res.potentials, var, k.s_max);

  const Matrix x = sample_matrix(cm.lambda, cfg.base.dist, cfg.base.seed, kSampleStream);
  const ScalingResult xres =
      sinkhorn_scale({x, cm.margins}, tight_options(cfg.sinkhorn_tol, 100000));
  const FluctuationPair pair =
      fluctuation_matrices(x, cm.lambda, xres.potentials, mean_res.potentials, k.s_max);
  rep.eigenvalues = gram_eigenvalues(pair.A);
  rep.cov_dev = covariance_deviation(pair);

  const Vector grid = uniform_grid(cfg.grid_points, cfg.grid_upper);
  rep.dyson = solve_dyson(rep.profile.S, grid, cfg.eta_ladder);
  rep.singular_density = singular_pushforward(rep.dyson.grid, rep.dyson.density);

  rep.mp_scale = static_cast<double>(n) * rep.profile.S.mean();
  const double scale = rep.mp_scale;
  rep.ks_to_mp = ks_distance(rep.eigenvalues, [scale](double t) { return mp_cdf_scaled(t, scale); });
  const DysonSolution& sol = rep.dyson;
  rep.ks_to_dyson = ks_distance(rep.eigenvalues, [&sol](double t) { return dyson_cdf(sol, t); });

  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    if (grid(g) < 0.05) continue;
    rep.sup_dyson_vs_mp = std::max(
        rep.sup_dyson_vs_mp, std::abs(sol.density(g) - mp_density_scaled(grid(g), scale)));
  }

  double edge = 0.0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    if (sol.density(g) > 1e-3) edge = grid(g);
  }
  const double hi = 1.02 * std::max(edge, rep.eigenvalues.maxCoeff());
  rep.eigen_histogram = make_histogram(rep.eigenvalues, 0.0, hi, cfg.bins);
  const double width = hi / cfg.bins;
  for (int b = 0; b < cfg.bins; ++b) {
    const double lo_edge = rep.eigen_histogram.edges(b);
    const double hi_edge = rep.eigen_histogram.edges(b + 1);
    const double predicted = dyson_cdf(sol, hi_edge) - (b == 0 ? 0.0 : dyson_cdf(sol, lo_edge));
    rep.l1_hist_vs_dyson += std::abs(rep.eigen_histogram.density(b) * width - predicted);
  }

  const Vector sv = rep.eigenvalues.array().sqrt();
  rep.singular_histogram = make_histogram(sv, 0.0, std::sqrt(hi), cfg.bins);
  rep.singular_hist_mass = rep.singular_histogram.density.sum() * std::sqrt(hi) / cfg.bins;

  rep.rigidity = rigidity_report(rep.eigenvalues, sol, cfg.rigidity_eps, cfg.Delta,
                                 cfg.eps_star, k.eps_cov, m == n);
  return rep;
}

// -------------------------------------------------- deterministic limit

const char* to_string(LimitShape s) {
  switch (s) {
    case LimitShape::Constant: return "constant";
    case LimitShape::LinearRamp: return "linear_ramp";
    case LimitShape::Gaussian: return "gaussian";
  }
  return "unknown";
}

LimitShape limit_shape_from_string(const std::string& name) {
  if (name == "constant") return LimitShape::Constant;
  if (name == "linear_ramp") return LimitShape::LinearRamp;
  if (name == "gaussian") return LimitShape::Gaussian;
  throw Error(ErrorCode::InvalidArgument, "unknown shape '" + name + "'");
}

namespace {

constexpr double kGaussNodes[4] = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
constexpr double kGaussWeights[4] = {0.3478548451374538, 0.6521451548625461,
                                     0.6521451548625461, 0.3478548451374538};

double margin_shape(LimitShape s, double slope, double bandwidth, double x) {
  switch (s) {
    case LimitShape::Constant: return 1.0;
    case LimitShape::LinearRamp: return 1.0 + slope * (x - 0.5);
    case LimitShape::Gaussian:
      return std::exp(-(x - 0.5) * (x - 0.5) / (2.0 * bandwidth * bandwidth));
  }
  return 1.0;
}

Vector cell_masses(Eigen::Index m, const std::function<double(double)>& f) {
  Vector out(m);
  const double h = 1.0 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mid = (static_cast<double>(i) + 0.5) * h;
    double s = 0.0;
    for (int a = 0; a < 4; ++a) s += kGaussWeights[a] * f(mid + 0.5 * h * kGaussNodes[a]);
    out(i) = 0.5 * h * s;
  }
  return out / out.sum();
}

Matrix kernel_masses(Eigen::Index m, const LimitSpec& spec) {
  Matrix out(m, m);
  const double h = 1.0 / static_cast<double>(m);
  const double bw = spec.bandwidth;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (spec.kernel == LimitShape::Constant) {
        out(i, j) = 1.0;
        continue;
      }
      double s = 0.0;
      for (int a = 0; a < 4; ++a) {
        const double x = (static_cast<double>(i) + 0.5 + 0.5 * kGaussNodes[a]) * h;
        for (int b = 0; b < 4; ++b) {
          const double y = (static_cast<double>(j) + 0.5 + 0.5 * kGaussNodes[b]) * h;
          s += kGaussWeights[a] * kGaussWeights[b] *
               std::exp(-(x - y) * (x - y) / (2.0 * bw * bw));
        }
      }
      out(i, j) = s;
    }
  }
  return out / out.sum();
}

struct LimitLevel {
  Vector p, q;
  Matrix R;
  Matrix bridge;
};

LimitLevel limit_level(const LimitSpec& spec, int level) {
  const Eigen::Index m = Eigen::Index{1} << level;
  LimitLevel l;
  l.p = cell_masses(m, [&](double x) {
    return margin_shape(spec.row_margin, spec.row_slope, spec.bandwidth, x);
  });
  l.q = cell_masses(m, [&](double x) {
    return margin_shape(spec.col_margin, spec.col_slope, spec.bandwidth, x);
  });
  l.R = kernel_masses(m, spec);
  l.bridge = discrete_bridge(l.R, l.p, l.q, 1e-13);
  return l;
}

}  // namespace

LimitReport run_deterministic_limit_experiment(const LimitSpec& spec) {
  if (spec.k_min < 0 || spec.k_max < spec.k_min || spec.ref_level < spec.k_max ||
      spec.ref_level > 12) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= k_min <= k_max <= ref_level <= 12");
  }
  for (double slope : {spec.row_slope, spec.col_slope}) {
    if (!(std::abs(slope) < 2.0)) {
      throw Error(ErrorCode::InfeasibleSpec, "ramp slope must lie in (-2, 2)");
    }
  }
  if (!(spec.bandwidth > 0.0)) throw Error(ErrorCode::InfeasibleSpec, "bandwidth must be positive");

  const LimitLevel ref = limit_level(spec, spec.ref_level);
  std::vector<LimitLevel> levels;
  for (int k = spec.k_min; k <= spec.k_max; ++k) levels.push_back(limit_level(spec, k));

  LimitReport rep;
  auto absorb = [&](const LimitLevel& l) {
    const MarginPair mp = MarginPair::make(l.p, l.q);
    rep.K = std::max(rep.K, cost_bound_K({l.R, mp}));
    rep.delta = std::min(rep.delta, delta_smoothness(mp));
  };
  absorb(ref);
  for (const auto& l : levels) absorb(l);

  const GridDensity2D ref_bridge = kernel_density_2d(ref.bridge, ref.bridge.sum());
  const GridDensity2D ref_kernel = kernel_density_2d(ref.R, ref.R.sum());
  const GridDensity1D ref_p = histogram_density_1d(ref.p, 1.0);
  const GridDensity1D ref_q = histogram_density_1d(ref.q, 1.0);

  for (std::size_t idx = 0; idx < levels.size(); ++idx) {
    const LimitLevel& l = levels[idx];
    LimitRow row;
    row.k = spec.k_min + static_cast<int>(idx);
    row.size = l.p.size();
    const Eigen::Index f = ref.p.size() / row.size;
    const double dh = hellinger(refine(kernel_density_2d(l.bridge, l.bridge.sum()), f, f), ref_bridge);
    row.lhs = dh * dh;
    row.l1_r = l1_density_distance(refine(histogram_density_1d(l.p, 1.0), f), ref_p);
    row.l1_c = l1_density_distance(refine(histogram_density_1d(l.q, 1.0), f), ref_q);
    row.dH_ref = hellinger(refine(kernel_density_2d(l.R, l.R.sum()), f, f), ref_kernel);
    row.rhs = deterministic_limit_rhs(rep.K, rep.delta, row.l1_r, row.l1_c, row.dH_ref);
    row.holds = row.lhs <= row.rhs + 1e-14;
    rep.all_hold = rep.all_hold && row.holds;
    if (!rep.rows.empty()) {
      const double prev = rep.rows.back().lhs;
      const bool both_zero = prev <= 1e-14 && row.lhs <= 1e-14;
      if (!(row.lhs < prev || both_zero)) rep.lhs_decreasing = false;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace sinkbridge
