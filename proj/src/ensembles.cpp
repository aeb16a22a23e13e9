#include "sinkbridge/ensembles.hpp"

#include <cmath>
#include <random>

namespace sinkbridge {

namespace {

void require_mean(DistKind kind, double mean) {
  if (!(mean > 0.0)) throw Error(ErrorCode::InvalidArgument, "entry mean must be positive");
  if (kind == DistKind::Bernoulli && !(mean < 1.0)) {
    throw Error(ErrorCode::BernoulliMeanOutOfRange, "Bernoulli mean must lie in (0, 1)");
  }
}

double poisson_abs_moment(double mean, int q) {
  const double upper = mean + 40.0 * std::sqrt(mean) + 60.0;
  double total = 0.0;
  for (int k = 0; k <= static_cast<int>(upper); ++k) {
    const double log_pmf = k * std::log(mean) - mean - std::lgamma(k + 1.0);
    total += std::exp(log_pmf) * std::pow(std::abs(k - mean), q);
  }
  return total;
}

// integral over [0, inf) of |y - 1|^q e^{-y} dy
double exponential_unit_abs_moment(int q) {
  double series = 0.0;
  double fact = 1.0;
  for (int k = 0; k < 60; ++k) {
    if (k > 0) fact *= k;
    series += 1.0 / (fact * (q + k + 1));
  }
  return std::exp(-1.0) * (std::tgamma(q + 1.0) + series);
}

Matrix sample_columns(const Matrix& lambda, std::uint64_t seed, std::uint64_t stream,
                      const auto& draw) {
  Matrix out(lambda.rows(), lambda.cols());
  for (Eigen::Index j = 0; j < lambda.cols(); ++j) {
    Philox rng(seed, derive_stream(stream, static_cast<std::uint64_t>(j)));
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) out(i, j) = draw(lambda(i, j), rng);
  }
  return out;
}

}  // namespace

const char* to_string(DistKind kind) {
  switch (kind) {
    case DistKind::Poisson: return "poisson";
    case DistKind::Bernoulli: return "bernoulli";
    case DistKind::Exponential: return "exponential";
    case DistKind::Uniform: return "uniform";
  }
  return "unknown";
}

DistKind dist_kind_from_string(const std::string& name) {
  if (name == "poisson") return DistKind::Poisson;
  if (name == "bernoulli") return DistKind::Bernoulli;
  if (name == "exponential") return DistKind::Exponential;
  if (name == "uniform") return DistKind::Uniform;
  throw Error(ErrorCode::InvalidArgument, "unknown distribution '" + name + "'");
}

double EntryDistribution::variance(double mean) const {
  switch (kind) {
    case DistKind::Poisson: return mean;
    case DistKind::Bernoulli: return mean * (1.0 - mean);
    case DistKind::Exponential: return mean * mean;
    case DistKind::Uniform: return mean * mean / 3.0;
  }
  return 0.0;
}

double EntryDistribution::zero_probability(double mean) const {
  switch (kind) {
    case DistKind::Poisson: return std::exp(-mean);
    case DistKind::Bernoulli: return 1.0 - mean;
    case DistKind::Exponential:
    case DistKind::Uniform: return 0.0;
  }
  return 0.0;
}

SubExpParams EntryDistribution::subexp(double lambda_max) const {
  return subexp_params(kind, lambda_max);
}

SubExpParams subexp_params(DistKind kind, double lambda_max) {
  switch (kind) {
    case DistKind::Poisson:
      // R = 1 fails the q = 4 moment once the mean exceeds about 3.7.
      return {std::sqrt(lambda_max), std::max(1.0, std::sqrt(lambda_max / 2.0))};
    case DistKind::Bernoulli: return {0.5, 1.0};
    case DistKind::Exponential:
      return {std::sqrt(2.0) * lambda_max, 2.0 * lambda_max};
    case DistKind::Uniform: return {lambda_max / std::sqrt(3.0), lambda_max};
  }
  return {};
}

double EntryDistribution::central_abs_moment(double mean, int q) const {
  require_mean(kind, mean);
  switch (kind) {
    case DistKind::Poisson: return poisson_abs_moment(mean, q);
    case DistKind::Bernoulli:
      return mean * std::pow(1.0 - mean, q) + (1.0 - mean) * std::pow(mean, q);
    case DistKind::Exponential: return std::pow(mean, q) * exponential_unit_abs_moment(q);
    case DistKind::Uniform: return std::pow(mean, q) / (q + 1.0);
  }
  return 0.0;
}

double EntryDistribution::sample(double mean, Philox& rng) const {
  require_mean(kind, mean);
  switch (kind) {
    case DistKind::Poisson: {
      std::poisson_distribution<long long> d(mean);
      return static_cast<double>(d(rng));
    }
    case DistKind::Bernoulli: return rng.uniform() < mean ? 1.0 : 0.0;
    case DistKind::Exponential: return -mean * std::log1p(-rng.uniform());
    case DistKind::Uniform: return 2.0 * mean * rng.uniform();
  }
  return 0.0;
}

double EntryDistribution::sample_mean_of(double mean, std::int64_t count,
                                         Philox& rng) const {
  require_mean(kind, mean);
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be positive");
  const auto c = static_cast<double>(count);
  switch (kind) {
    case DistKind::Poisson: {
      std::poisson_distribution<long long> d(mean * c);
      return static_cast<double>(d(rng)) / c;
    }
    case DistKind::Bernoulli: {
      std::binomial_distribution<long long> d(count, mean);
      return static_cast<double>(d(rng)) / c;
    }
    case DistKind::Exponential: {
      std::gamma_distribution<double> d(c, mean);
      return d(rng) / c;
    }
    case DistKind::Uniform: {
      double total = 0.0;
      for (std::int64_t k = 0; k < count; ++k) total += rng.uniform();
      return 2.0 * mean * total / c;
    }
  }
  return 0.0;
}

Matrix sample_matrix(const Matrix& lambda, DistKind kind, std::uint64_t seed,
                     std::uint64_t stream) {
  const EntryDistribution dist{kind};
  return sample_columns(lambda, seed, stream,
                        [&](double mean, Philox& rng) { return dist.sample(mean, rng); });
}

Matrix sample_mean_matrix(const Matrix& lambda, DistKind kind, std::int64_t count,
                          std::uint64_t seed, std::uint64_t stream) {
  const EntryDistribution dist{kind};
  return sample_columns(lambda, seed, stream, [&](double mean, Philox& rng) {
    return dist.sample_mean_of(mean, count, rng);
  });
}

Matrix variance_matrix(const Matrix& lambda, DistKind kind) {
  const EntryDistribution dist{kind};
  return lambda.unaryExpr([&](double mean) { return dist.variance(mean); });
}

namespace {

Vector block_vector(const BlockSpec& spec, Eigen::Index size, const char* what) {
  if (spec.kind == BlockSpec::Kind::Uniform) {
    if (!(spec.lo > 0.0)) {
      throw Error(ErrorCode::InfeasibleSpec, std::string(what) + " value must be positive");
    }
    return Vector::Constant(size, spec.lo);
  }
  if (!(spec.lo > 0.0) || !(spec.hi > 0.0)) {
    throw Error(ErrorCode::InfeasibleSpec, std::string(what) + " levels must be positive");
  }
  if (!(spec.split >= 0.0 && spec.split <= 1.0)) {
    throw Error(ErrorCode::InfeasibleSpec, std::string(what) + " split must lie in [0, 1]");
  }
  const auto cut = static_cast<Eigen::Index>(std::ceil(spec.split * static_cast<double>(size)));
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = i < cut ? spec.lo : spec.hi;
  return v;
}

}  // namespace

ConfigMatrices build_config_matrices(const ExperimentConfig& cfg) {
  if (cfg.m < 1 || cfg.n < 1) throw Error(ErrorCode::InfeasibleSpec, "empty dimensions");
  const auto n = static_cast<double>(cfg.n);
  const Vector r = block_vector(cfg.margin_spec, cfg.m, "margin") * n;
  const Vector c = Vector::Constant(cfg.n, r.sum() / n);
  const Vector rows = block_vector(cfg.mean_spec, cfg.m, "mean");

  ConfigMatrices out;
  out.lambda = rows * Eigen::RowVectorXd::Ones(cfg.n);
  if (cfg.dist == DistKind::Bernoulli && (out.lambda.array() >= 1.0).any()) {
    throw Error(ErrorCode::BernoulliMeanOutOfRange, "Bernoulli means must lie in (0, 1)");
  }
  out.margins = MarginPair::make(r, c);
  return out;
}

}  // namespace sinkbridge
