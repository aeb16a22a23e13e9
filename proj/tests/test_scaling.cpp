#include <doctest.h>

#include <cmath>
#include <limits>

#include "sinkbridge/random.hpp"
#include "sinkbridge/scaling.hpp"

using namespace sinkbridge;

namespace {

Matrix random_positive(Philox& rng, Eigen::Index m, Eigen::Index n) {
  Matrix a(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = 0.2 + 1.8 * rng.uniform();
  }
  return a;
}

MarginPair random_margins(Philox& rng, Eigen::Index m, Eigen::Index n) {
  Vector r(m), c(n);
  for (Eigen::Index i = 0; i < m; ++i) r(i) = 0.5 + 1.5 * rng.uniform();
  for (Eigen::Index j = 0; j < n; ++j) c(j) = 0.5 + 1.5 * rng.uniform();
  c *= r.sum() / c.sum();
  return MarginPair::make(r, c);
}

}  // namespace

TEST_CASE("margin pair validation") {
  CHECK_THROWS_AS(MarginPair::make(Vector::Ones(2), Vector::Ones(3)), Error);
  Vector neg(2);
  neg << -1.0, 3.0;
  CHECK_THROWS_AS(MarginPair::make(neg, Vector::Ones(2)), Error);
  const MarginPair mg = MarginPair::uniform(3, 2, 2.0, 3.0);
  CHECK(mg.N == doctest::Approx(6.0));
}

TEST_CASE("matrix already in the polytope is a fixed point") {
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  const MarginPair mg = MarginPair::make(a.rowwise().sum(), a.colwise().sum().transpose());
  const ScalingResult res = sinkhorn_scale({a, mg});
  CHECK(res.iterations <= 1);
  CHECK((res.rescaled - a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(res.potentials.alpha.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(res.potentials.beta.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rank-one mean collapses to the independence table") {
  Philox rng(1, 2);
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index m = 1 + k, n = 3 + 2 * k;
    Vector a(m), b(n);
    for (Eigen::Index i = 0; i < m; ++i) a(i) = 0.1 + 5.0 * rng.uniform();
    for (Eigen::Index j = 0; j < n; ++j) b(j) = 0.1 + 5.0 * rng.uniform();
    const MarginPair mg = random_margins(rng, m, n);
    const Matrix out = sinkhorn_scale({a * b.transpose(), mg}).rescaled;
    const Matrix expect = mg.r * mg.c.transpose() / mg.N;
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("two-by-two closed form at unit margins") {
  const double s = 0.1, g = 0.01;
  Matrix R(2, 2);
  R << 0.25, 0.5 - (s + g), 0.25, s + g;
  SinkhornOptions opt;
  opt.tol = 1e-14;
  opt.max_iter = 1000000;
  const Matrix pi = sinkhorn_scale({R, MarginPair::uniform(2, 2, 1.0, 1.0)}, opt).rescaled;
  const double a = std::sqrt(s + g) / (std::sqrt(0.5 - s - g) + std::sqrt(s + g));
  CHECK(pi(0, 0) == doctest::Approx(a).epsilon(1e-12));
  CHECK(pi(1, 1) == doctest::Approx(a).epsilon(1e-12));
  CHECK(pi(0, 1) == doctest::Approx(1.0 - a).epsilon(1e-12));
  // At probability margins every entry halves.
  const Matrix half = sinkhorn_scale({R, MarginPair::uniform(2, 2, 0.5, 0.5)}, opt).rescaled;
  CHECK(half(0, 0) == doctest::Approx(a / 2).epsilon(1e-12));
}

TEST_CASE("margin exactness, entrywise identity and gauges") {
  Philox rng(3, 4);
  const Matrix a = random_positive(rng, 5, 7);
  const MarginPair mg = random_margins(rng, 5, 7);
  Matrix reference;
  for (Gauge g : {Gauge::BetaCWeighted, Gauge::MaxEqualized, Gauge::KernelOrthogonal}) {
    SinkhornOptions opt;
    opt.gauge = g;
    const ScalingResult res = sinkhorn_scale({a, mg}, opt);
    CHECK(max_relative_margin_error(res.rescaled, mg) <= 1e-10);
    CHECK(res.potentials.gauge == g);
    const Matrix again = apply_potentials(a, res.potentials);
    CHECK(((again - res.rescaled).array().abs() / res.rescaled.array()).maxCoeff() < 1e-12);
    if (reference.size() == 0) {
      reference = res.rescaled;
    } else {
      CHECK((res.rescaled - reference).cwiseAbs().maxCoeff() < 1e-12);
    }
    if (g == Gauge::BetaCWeighted) {
      CHECK(std::abs(res.potentials.beta.dot(mg.c)) < 1e-9 * mg.N);
    }
    if (g == Gauge::MaxEqualized) {
      CHECK(res.potentials.alpha.maxCoeff() == doctest::Approx(res.potentials.beta.maxCoeff()));
    }
  }
}

TEST_CASE("gauge_fix is idempotent and undoes shifts") {
  Philox rng(5, 6);
  const MarginPair mg = random_margins(rng, 4, 6);
  Potentials p{Vector::Random(4), Vector::Random(6), Gauge::BetaCWeighted};
  const Potentials fixed = gauge_fix(p, mg, Gauge::BetaCWeighted);
  CHECK(std::abs(fixed.beta.dot(mg.c)) < 1e-9 * mg.N);
  const Potentials twice = gauge_fix(fixed, mg, Gauge::BetaCWeighted);
  CHECK((twice.alpha - fixed.alpha).cwiseAbs().maxCoeff() < 1e-14);
  const Potentials back = gauge_fix(shift_potentials(fixed, 0.7), mg, Gauge::BetaCWeighted);
  CHECK((back.alpha - fixed.alpha).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.beta - fixed.beta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dual objective") {
  Matrix a = Matrix::Constant(2, 2, 0.5);
  const MarginPair mg = MarginPair::uniform(2, 2, 1.0, 1.0);
  const Potentials zero{Vector::Zero(2), Vector::Zero(2), Gauge::BetaCWeighted};
  // <exp(0), Lambda> with |Lambda|_1 = N.
  CHECK(dual_objective({a, mg}, zero) == doctest::Approx(-2.0));

  Philox rng(7, 8);
  for (int k = 0; k < 5; ++k) {
    const Matrix b = random_positive(rng, 5, 5);
    const MarginPair m5 = random_margins(rng, 5, 5);
    const ScalingResult res = sinkhorn_scale({b, m5});
    const double best = dual_objective({b, m5}, res.potentials);
    for (int t = 0; t < 5; ++t) {
      Potentials p = res.potentials;
      p.alpha(t) += (t % 2 == 0 ? 0.1 : -0.1);
      CHECK(dual_objective({b, m5}, p) < best);
    }
  }
}

TEST_CASE("dual objective does not decrease across sweeps") {
  Philox rng(9, 10);
  const Matrix b = random_positive(rng, 6, 4);
  const MarginPair mg = random_margins(rng, 6, 4);
  std::vector<double> values;
  SinkhornOptions opt;
  opt.on_sweep = [&](int, const Vector& a, const Vector& be) {
    values.push_back(dual_objective({b, mg}, {a, be, Gauge::BetaCWeighted}));
  };
  sinkhorn_scale({b, mg}, opt);
  REQUIRE(values.size() >= 2);
  for (std::size_t k = 1; k < values.size(); ++k) CHECK(values[k] >= values[k - 1] - 1e-12);
}

TEST_CASE("kl_to_reference") {
  Matrix a(2, 2);
  a << 1, 2, 0, 3;
  CHECK(kl_to_reference(a, a) == doctest::Approx(0.0));
  Matrix z = a;
  z(1, 0) = 0.5;
  CHECK(std::isinf(kl_to_reference(z, a)));

  // Independence table against a rank-one reference with other margins:
  // sum Z log(Z / Lambda) by brute force.
  Vector u(2), v(3);
  u << 1, 2;
  v << 1, 1, 2;
  const Matrix lambda = u * v.transpose();
  Vector r(2), c(3);
  r << 2, 2;
  c << 1, 1, 2;
  const Matrix indep = r * c.transpose() / 4.0;
  double brute = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) brute += indep(i, j) * std::log(indep(i, j) / lambda(i, j));
  }
  CHECK(kl_to_reference(indep, lambda) == doctest::Approx(brute));
}

TEST_CASE("scaled matrix has the smallest divergence in its polytope") {
  Philox rng(11, 12);
  const Matrix lambda = random_positive(rng, 4, 5);
  const MarginPair mg = random_margins(rng, 4, 5);
  const double best = kl_to_reference(sinkhorn_scale({lambda, mg}).rescaled, lambda);
  for (int k = 0; k < 20; ++k) {
    const Matrix other = sinkhorn_scale({random_positive(rng, 4, 5), mg}).rescaled;
    CHECK(best <= kl_to_reference(other, lambda) + 1e-8);
  }
}

TEST_CASE("Menon-Schneider check") {
  Matrix nutz(2, 2);
  nutz << 1, 1, 0, 1;
  const ScalabilityVerdict v = check_scalability(nutz, MarginPair::uniform(2, 2, 0.5, 0.5));
  CHECK_FALSE(v.scalable);
  CHECK(v.witness_rows == std::vector<int>{0});
  CHECK(v.witness_cols == std::vector<int>{0});

  CHECK(check_scalability(Matrix::Identity(2, 2), MarginPair::uniform(2, 2, 0.5, 0.5)).scalable);

  Philox rng(13, 14);
  CHECK(check_scalability(random_positive(rng, 6, 9), random_margins(rng, 6, 9)).scalable);
  CHECK_THROWS_AS(check_scalability(Matrix::Ones(25, 20), MarginPair::uniform(25, 20, 4, 5),
                                    ScalabilityMode::Exact),
                  Error);
  CHECK(check_scalability(Matrix::Ones(25, 20), MarginPair::uniform(25, 20, 4, 5),
                          ScalabilityMode::Auto)
            .scalable);
}

TEST_CASE("exact verdicts agree with Sinkhorn on small zero patterns") {
  Philox rng(15, 16);
  int agree = 0;
  for (int k = 0; k < 200; ++k) {
    const int m = 2 + static_cast<int>(rng.uniform() * 3);
    const int n = 2 + static_cast<int>(rng.uniform() * 3);
    Matrix a(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = rng.uniform() < 0.6 ? 1.0 : 0.0;
    }
    const MarginPair mg = random_margins(rng, m, n);
    bool converged = true;
    try {
      SinkhornOptions opt;
      opt.tol = 1e-8;
      opt.max_iter = 100000;
      sinkhorn_scale({a, mg}, opt);
    } catch (const Error&) {
      converged = false;
    }
    agree += check_scalability(a, mg).scalable == converged;
  }
  CHECK(agree == 200);
}

TEST_CASE("non-scalable input raises MaxIterations with the last iterate") {
  Matrix nutz(2, 2);
  nutz << 1, 1, 0, 1;
  SinkhornOptions opt;
  opt.max_iter = 50;
  try {
    sinkhorn_scale({nutz, MarginPair::uniform(2, 2, 0.5, 0.5)}, opt);
    FAIL("expected MaxIterationsError");
  } catch (const MaxIterationsError& e) {
    CHECK(e.code() == ErrorCode::MaxIterations);
    CHECK(e.is_numeric());
    CHECK(e.partial().iterations == 50);
  }
}

TEST_CASE("gauge distance against a grid search over the shift") {
  Philox rng(17, 18);
  for (int k = 0; k < 20; ++k) {
    Potentials p1{Vector::Zero(4), Vector::Zero(3), Gauge::BetaCWeighted};
    Potentials p2 = p1;
    for (int i = 0; i < 4; ++i) p1.alpha(i) = 2.0 * rng.uniform() - 1.0;
    if (k % 2 == 1) {
      for (int j = 0; j < 3; ++j) p1.beta(j) = 2.0 * rng.uniform() - 1.0;
    }
    double grid = std::numeric_limits<double>::infinity();
    for (int s = -40000; s <= 40000; ++s) {
      const double t = s * 1e-4;
      const double v = std::max(((p1.alpha - p2.alpha).array() + t).abs().maxCoeff(),
                                ((p1.beta - p2.beta).array() - t).abs().maxCoeff());
      grid = std::min(grid, v);
    }
    CHECK(gauge_distance(p1, p2) == doctest::Approx(grid).epsilon(1e-3));
    CHECK(gauge_distance(p1, p2) <= grid + 1e-12);
  }
  Potentials p{Vector::Random(3), Vector::Random(5), Gauge::BetaCWeighted};
  CHECK(gauge_distance(p, shift_potentials(p, 1.3)) < 1e-12);
  CHECK(gauge_distance(p, p) == 0.0);
}

TEST_CASE("potential bounds") {
  Vector r(3), c(4);
  r << 1, 2, 3;
  c << 1, 2, 2, 1;
  const MarginPair mg = MarginPair::make(r, c);
  const ScalingProblem rank_one{0.7 * r * c.transpose(), mg};
  const PotentialBounds pb = potential_bounds(rank_one);
  const double expect = std::log(mg.N / rank_one.lambda.sum());
  CHECK(pb.lower == doctest::Approx(expect));
  CHECK(pb.upper == doctest::Approx(expect));

  // Homogeneous square case: alpha + beta = log(a / (n lambda)).
  const int n = 6;
  const double lam = 0.4, av = 2.5;
  const ScalingProblem homo{Matrix::Constant(n, n, lam), MarginPair::uniform(n, n, av, av)};
  const ScalingResult res = sinkhorn_scale(homo);
  const double sum = res.potentials.alpha(0) + res.potentials.beta(0);
  CHECK(sum == doctest::Approx(std::log(av / (n * lam))));
  const PotentialBounds hb = potential_bounds(homo);
  CHECK(hb.lower <= sum + 1e-12);
  CHECK(sum <= hb.upper + 1e-12);

  Matrix z = Matrix::Ones(2, 2);
  z(0, 0) = 0.0;
  CHECK_THROWS_AS(potential_bounds({z, MarginPair::uniform(2, 2, 1, 1)}), Error);
}
