#include <doctest.h>

#include <cmath>
#include <limits>

#include "sinkbridge/random.hpp"
#include "sinkbridge/stability.hpp"

using namespace sinkbridge;

TEST_CASE("row alignment against brute force") {
  Philox rng(4, 4);
  for (int k = 0; k < 10; ++k) {
    Matrix a(5, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
    double brute = std::numeric_limits<double>::infinity();
    for (int i1 = 0; i1 < 5; ++i1) {
      for (int i2 = 0; i2 < 5; ++i2) brute = std::min(brute, a.row(i1).dot(a.row(i2)) / 6.0);
    }
    CHECK(row_alignment(a) == doctest::Approx(brute));
  }
}

TEST_CASE("C_A for the all-ones matrix") {
  for (int n : {2, 5, 9}) {
    // rho_A = 1, so C_A = 1 + 9 max r max c / n^2.
    CHECK(stability_constant_CA(Matrix::Ones(n, n), MarginPair::uniform(n, n, 1, 1)) ==
          doctest::Approx(1.0 + 9.0 / (n * n)));
    CHECK(stability_constant_CA(Matrix::Ones(n, n), MarginPair::uniform(n, n, n, n)) ==
          doctest::Approx(10.0));
  }
  const MarginPair mg = MarginPair::uniform(2, 2, 1, 1);
  Matrix z(2, 2);
  z << 1, 0, 0, 1;
  CHECK_THROWS_AS(stability_constant_CA(z, mg), Error);
}

TEST_CASE("concentration constants relations") {
  const Matrix lam = Matrix::Constant(6, 8, 2.0);
  const MarginPair mg = MarginPair::uniform(6, 8, 8.0, 6.0);
  const StabilityConstants k = concentration_constants({lam, mg}, std::sqrt(2.0), 1.0, 1.0);
  CHECK(k.eps_max * 50.0 * k.C_A * k.C_A == doctest::Approx(1.0));
  CHECK(k.eps_pot == doctest::Approx(16.0 * k.C_star * k.eps0));
  CHECK(k.tau == doctest::Approx(concentration_tau(6, 8, 1.0)));
  CHECK(k.tau == doctest::Approx(2.0 * std::log(8.0) + std::log(4.0)));
  CHECK(k.t_D == doctest::Approx(std::sqrt(2.0) * std::sqrt(2.0 * 8 * k.tau) + 2.0 * k.tau));
  CHECK(k.K == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isnan(k.eps_cov));
  const StabilityConstants kv =
      concentration_constants({lam, mg}, std::sqrt(2.0), 1.0, 1.0, Matrix(lam));
  CHECK(std::isfinite(kv.eps_cov));
  CHECK(kv.s_max > 0.0);
}

TEST_CASE("potential stability on exact scalings") {
  Philox rng(6, 6);
  Matrix b(4, 5);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 0.5 + rng.uniform();
  const MarginPair mg = MarginPair::uniform(4, 5, 5.0, 4.0);
  SinkhornOptions opt;
  opt.tol = 1e-14;
  const Matrix a0 = sinkhorn_scale({b, mg}, opt).rescaled;
  const PotentialStabilityReport exact = potential_stability_check(a0, mg);
  CHECK(exact.within_eps_max);
  CHECK(exact.actual < 1e-10);
  CHECK(exact.holds);

  Matrix a = a0;
  a(0, 0) *= 1.0 + 0.3 * exact.eps_max;
  const PotentialStabilityReport rep = potential_stability_check(a, mg);
  CHECK(rep.within_eps_max);
  CHECK(rep.bound == doctest::Approx(4.0 * rep.C_A * rep.eps));
  CHECK(rep.holds);
}

TEST_CASE("discrete bridge stability") {
  const Vector p = Vector::Constant(3, 1.0 / 3);
  const Vector q = Vector::Constant(4, 0.25);
  Matrix R = Matrix::Ones(3, 4);
  R(1, 2) = 3.0;
  const Matrix pi = discrete_bridge(R, p, q);
  CHECK(pi.rowwise().sum().isApprox(p, 1e-10));
  CHECK(pi.colwise().sum().transpose().isApprox(q, 1e-10));
  // Identical inputs give zero on both sides of every inequality.
  CHECK(kernel_stability_rhs(R, R, p, q) == doctest::Approx(0.0));
  CHECK(margin_stability_rhs(R, p, q, p, q) == doctest::Approx(0.0));
  CHECK(product_margin_ratio_M(p, q, p, q) == doctest::Approx(0.0));
  // Scaling the reference does not move the bridge.
  CHECK(discrete_hellinger(pi, discrete_bridge(5.0 * R, p, q)) < 1e-8);
  CHECK(cost_sup(R * 12.0, p, q, false) == doctest::Approx(std::log(3.0 * 12.0 / 14.0)).epsilon(1e-9));

  Matrix Z = R;
  Z(0, 0) = 0.0;
  CHECK_THROWS_AS(cost_sup(Z, p, q, false), Error);
}

TEST_CASE("deterministic limit and scalability bounds") {
  CHECK(deterministic_limit_rhs(0.0, 1.0, 0.0, 0.0, 0.5) == doctest::Approx(4.0 * 0.25));
  CHECK(deterministic_limit_rhs(1.0, 1.0, 0.1, 0.2, 0.0) == doctest::Approx(8.0 * 0.3));
  const ScalabilityProbabilityBound b =
      scalability_probability_bound(MarginPair::uniform(4, 4, 1, 1), 0.0, 0.5, 0.5);
  CHECK(b.bound1 == doctest::Approx(0.0));
}
