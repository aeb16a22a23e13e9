#include <doctest.h>

#include <cmath>

#include "sinkbridge/experiments.hpp"

using namespace sinkbridge;

namespace {

ExperimentConfig homogeneous(Eigen::Index n, double margin, double mean, int trials) {
  ExperimentConfig cfg;
  cfg.m = cfg.n = n;
  cfg.margin_spec = {BlockSpec::Kind::Uniform, margin, 0.0, 0.5};
  cfg.mean_spec = {BlockSpec::Kind::Uniform, mean, 0.0, 0.5};
  cfg.dist = DistKind::Poisson;
  cfg.seed = 3;
  cfg.trials = trials;
  return cfg;
}

}  // namespace

TEST_CASE("parallel_map is ordered and rethrows") {
  const auto out = parallel_map<int>(50, 4, [](int k) { return k * k; });
  for (int k = 0; k < 50; ++k) CHECK(out[k] == k * k);
  CHECK_THROWS_AS(parallel_map<int>(10, 3,
                                    [](int k) -> int {
                                      if (k == 7) throw Error(ErrorCode::InvalidArgument, "x");
                                      return k;
                                    }),
                  Error);
}

TEST_CASE("CLT linearization") {
  Matrix lam(3, 4);
  lam << 1, 2, 3, 1, 2, 2, 1, 3, 4, 1, 2, 2;
  const MarginPair mg = MarginPair::uniform(3, 4, 4.0, 3.0);
  const ScalingProblem problem{lam, mg};
  const CltModel model = clt_covariance(problem, variance_matrix(lam, DistKind::Poisson));

  Vector kernel(7);
  kernel << -1, -1, -1, 1, 1, 1, 1;
  CHECK((model.L * kernel).norm() < 1e-10);
  CHECK((model.L_dagger * model.L * model.L_dagger - model.L_dagger).norm() < 1e-10);
  CHECK((model.theory_cov - model.theory_cov.transpose()).norm() < 1e-12);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(model.theory_cov);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
  // Theory covariance lives in the kernel-orthogonal gauge.
  CHECK((model.theory_cov * kernel).norm() < 1e-10);

  const CltModel zero = clt_covariance(problem, Matrix::Zero(3, 4));
  CHECK(zero.theory_cov.norm() == doctest::Approx(0.0));
}

TEST_CASE("CLT runs are reproducible across worker counts") {
  CltConfig cfg;
  cfg.lambda = Matrix::Constant(2, 3, 2.0);
  cfg.margins = MarginPair::uniform(2, 3, 3.0, 2.0);
  cfg.M = 100;
  cfg.replicates = 40;
  cfg.seed = 8;
  cfg.workers = 1;
  const CltReport a = run_clt_experiment(cfg);
  cfg.workers = 4;
  const CltReport b = run_clt_experiment(cfg);
  CHECK(a.empirical_cov == b.empirical_cov);
  CHECK(a.max_gauge_residual < 1e-8);
}

TEST_CASE("degenerate injection gives zero deviations") {
  ConcentrationConfig cfg;
  cfg.base = homogeneous(20, 0.3, 2.0, 3);
  cfg.sampler = [](const Matrix& lambda, int) { return lambda; };
  const ConcentrationReport rep = run_concentration_experiment(cfg);
  REQUIRE(rep.trials.size() == 3);
  for (const auto& t : rep.trials) {
    CHECK(t.scalable);
    CHECK(t.gauge_distance < 1e-9);
    CHECK(t.e2_dev < 1e-12);
    CHECK(t.e3_dev < 1e-9);
    CHECK(t.noise_norm == 0.0);
    CHECK(t.e1);
  }
}

TEST_CASE("constant test function has no fluctuation") {
  ConcentrationConfig cfg;
  cfg.base = homogeneous(30, 0.3, 2.0, 5);
  const TestFunctionReport rep = run_test_function_experiment(cfg, "constant");
  for (const auto& t : rep.trials) CHECK(t.lhs < 1e-9);
}

TEST_CASE("concentration is deterministic in the seed") {
  ConcentrationConfig cfg;
  cfg.base = homogeneous(25, 0.3, 2.0, 6);
  cfg.workers = 1;
  const ConcentrationReport a = run_concentration_experiment(cfg);
  cfg.workers = 3;
  const ConcentrationReport b = run_concentration_experiment(cfg);
  for (std::size_t k = 0; k < a.trials.size(); ++k) {
    CHECK(a.trials[k].gauge_distance == b.trials[k].gauge_distance);
  }
}

TEST_CASE("deterministic limit with constant inputs is exact") {
  LimitSpec spec;
  spec.row_margin = spec.col_margin = spec.kernel = LimitShape::Constant;
  spec.k_min = 2;
  spec.k_max = 4;
  spec.ref_level = 6;
  const LimitReport rep = run_deterministic_limit_experiment(spec);
  CHECK(rep.K == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& r : rep.rows) {
    CHECK(r.lhs < 1e-12);
    CHECK(r.rhs < 1e-12);
    CHECK(r.holds);
  }
  CHECK(limit_shape_from_string("gaussian") == LimitShape::Gaussian);
  CHECK_THROWS_AS(limit_shape_from_string("triangle"), Error);
}

TEST_CASE("histograms and KS distance") {
  const Vector v = (Vector(4) << 0.1, 0.3, 0.6, 0.9).finished();
  const Histogram h = make_histogram(v, 0.0, 1.0, 2);
  CHECK(h.density(0) == doctest::Approx(1.0));
  CHECK(h.density(1) == doctest::Approx(1.0));
  CHECK(ks_distance(v, [](double x) { return x; }) == doctest::Approx(0.2));
}
