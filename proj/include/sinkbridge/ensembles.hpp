#pragma once

#include <cstdint>
#include <string>

#include "sinkbridge/random.hpp"
#include "sinkbridge/scaling.hpp"

namespace sinkbridge {

enum class DistKind { Poisson, Bernoulli, Exponential, Uniform };

const char* to_string(DistKind kind);
DistKind dist_kind_from_string(const std::string& name);

struct SubExpParams {
  double sigma = 0.0;
  double R = 0.0;
};

/// Entry law with prescribed mean: Poisson(mean), Bernoulli(mean),
/// Exponential with the given mean, or Uniform on [0, 2 mean].
struct EntryDistribution {
  DistKind kind = DistKind::Poisson;

  double variance(double mean) const;
  /// P(X = 0) at the given mean.
  double zero_probability(double mean) const;
  /// Moment-growth parameters valid for every mean in (0, lambda_max].
  SubExpParams subexp(double lambda_max) const;
  /// E|X - mean|^q, numerically.
  double central_abs_moment(double mean, int q) const;

  double sample(double mean, Philox& rng) const;
  /// Exact draw of the average of `count` independent copies.
  double sample_mean_of(double mean, std::int64_t count, Philox& rng) const;
};

SubExpParams subexp_params(DistKind kind, double lambda_max);

/// Independent entries with E[X_ij] = lambda(i, j). Column j draws from the
/// stream derive_stream(stream, j), so results do not depend on scheduling.
Matrix sample_matrix(const Matrix& lambda, DistKind kind, std::uint64_t seed,
                     std::uint64_t stream = 0);

/// Average of `count` independent matrices, sampled exactly through the
/// closure of each family under sums (Poisson, binomial, gamma); uniform
/// entries are summed directly.
Matrix sample_mean_matrix(const Matrix& lambda, DistKind kind, std::int64_t count,
                          std::uint64_t seed, std::uint64_t stream = 0);

Matrix variance_matrix(const Matrix& lambda, DistKind kind);

struct BlockSpec {
  enum class Kind { Uniform, RowBlock } kind = Kind::Uniform;
  // Uniform: value = lo. RowBlock: rows before ceil(split m) take lo, the rest hi.
  double lo = 0.0;
  double hi = 0.0;
  double split = 0.5;
};

struct ExperimentConfig {
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  // Row margins in units of n: r_i = value * n. Column margins are uniform
  // with the matching total.
  BlockSpec margin_spec;
  // Entries of the mean matrix.
  BlockSpec mean_spec;
  DistKind dist = DistKind::Poisson;
  std::uint64_t seed = 0;
  int trials = 1;
};

struct ConfigMatrices {
  Matrix lambda;
  MarginPair margins;
};

ConfigMatrices build_config_matrices(const ExperimentConfig& cfg);

}  // namespace sinkbridge
