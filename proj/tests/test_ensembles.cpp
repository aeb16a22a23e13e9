#include <doctest.h>

#include <array>
#include <cmath>

#include "sinkbridge/ensembles.hpp"

using namespace sinkbridge;

TEST_CASE("Philox known-answer vectors") {
  const auto zero = Philox::generate({0, 0, 0, 0}, {0, 0});
  CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = Philox::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                     {0xffffffffu, 0xffffffffu});
  CHECK(ones == std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("moment growth parameters are certified numerically") {
  for (DistKind kind : {DistKind::Poisson, DistKind::Bernoulli, DistKind::Exponential,
                        DistKind::Uniform}) {
    const double lmax = kind == DistKind::Bernoulli ? 0.9 : 4.0;
    const EntryDistribution d{kind};
    const SubExpParams p = d.subexp(lmax);
    for (double mean : {0.05, 0.4, 1.0, lmax}) {
      if (mean > lmax) continue;
      for (int q = 2; q <= 8; ++q) {
        const double bound = 0.5 * std::tgamma(q + 1.0) * p.sigma * p.sigma * std::pow(p.R, q - 2);
        CAPTURE(to_string(kind));
        CAPTURE(mean);
        CAPTURE(q);
        CHECK(d.central_abs_moment(mean, q) <= bound * (1.0 + 1e-9));
      }
    }
  }
}

TEST_CASE("samples respect supports and means") {
  const Matrix lam = Matrix::Constant(40, 50, 0.3);
  for (DistKind kind : {DistKind::Poisson, DistKind::Bernoulli, DistKind::Exponential,
                        DistKind::Uniform}) {
    const Matrix x = sample_matrix(lam, kind, 12);
    CHECK((x.array() >= 0.0).all());
    if (kind == DistKind::Bernoulli) CHECK(((x.array() == 0.0) || (x.array() == 1.0)).all());
    if (kind == DistKind::Poisson) CHECK((x.array() == x.array().round()).all());
    if (kind == DistKind::Uniform) CHECK((x.array() <= 0.6).all());
    const double se = std::sqrt(EntryDistribution{kind}.variance(0.3) / x.size());
    CHECK(std::abs(x.mean() - 0.3) < 5.0 * se);
    CHECK(variance_matrix(lam, kind)(0, 0) == doctest::Approx(EntryDistribution{kind}.variance(0.3)));
  }
  CHECK_THROWS_AS(sample_matrix(Matrix::Constant(2, 2, 1.5), DistKind::Bernoulli, 1), Error);
}

TEST_CASE("sampling is reproducible") {
  const Matrix lam = Matrix::Constant(5, 7, 2.0);
  CHECK(sample_matrix(lam, DistKind::Poisson, 3, 9) == sample_matrix(lam, DistKind::Poisson, 3, 9));
  CHECK(sample_matrix(lam, DistKind::Poisson, 3, 9) != sample_matrix(lam, DistKind::Poisson, 4, 9));
  CHECK(sample_mean_matrix(lam, DistKind::Exponential, 100, 3) ==
        sample_mean_matrix(lam, DistKind::Exponential, 100, 3));
}

TEST_CASE("mean of many copies concentrates at the variance/count rate") {
  const Matrix lam = Matrix::Constant(30, 30, 1.5);
  for (DistKind kind : {DistKind::Poisson, DistKind::Exponential, DistKind::Uniform}) {
    const std::int64_t count = 400;
    const Matrix xb = sample_mean_matrix(lam, kind, count, 17);
    const double var = EntryDistribution{kind}.variance(1.5) / count;
    const double emp = (xb.array() - 1.5).square().mean();
    CHECK(emp == doctest::Approx(var).epsilon(0.15));
  }
}

TEST_CASE("experiment configurations") {
  ExperimentConfig top;
  top.m = top.n = 100;
  top.margin_spec = {BlockSpec::Kind::Uniform, 0.3, 0.0, 0.5};
  top.mean_spec = {BlockSpec::Kind::Uniform, 0.4, 0.0, 0.5};
  const ConfigMatrices a = build_config_matrices(top);
  CHECK((a.lambda.array() == 0.4).all());
  CHECK((a.margins.r.array() == 30.0).all());
  CHECK((a.margins.c.array() == 30.0).all());

  ExperimentConfig bottom = top;
  bottom.margin_spec = {BlockSpec::Kind::RowBlock, 0.1, 0.5, 0.5};
  bottom.mean_spec = {BlockSpec::Kind::RowBlock, 0.2, 0.6, 0.5};
  const ConfigMatrices b = build_config_matrices(bottom);
  CHECK((b.margins.r.head(50).array() == 10.0).all());
  CHECK((b.margins.r.tail(50).array() == 50.0).all());
  CHECK(b.margins.r.sum() == doctest::Approx(3000.0));
  CHECK(b.margins.c.sum() == doctest::Approx(3000.0));
  CHECK(b.lambda(0, 0) == 0.2);
  CHECK(b.lambda(99, 0) == 0.6);
}
