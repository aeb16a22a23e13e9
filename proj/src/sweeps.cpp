#include <algorithm>
#include <cmath>

#include "sinkbridge/experiments.hpp"

namespace sinkbridge {

namespace {

constexpr std::uint64_t kStabilityStream = 0x5a;
constexpr std::uint64_t kPotentialStream = 0x9b;
constexpr std::uint64_t kSandwichStream = 0x3c;
constexpr std::uint64_t kContainStream = 0xd4;
constexpr std::uint64_t kPatternStream = 0x7e;

double uniform_in(Philox& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

int int_in(Philox& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

Vector random_vector(Philox& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = uniform_in(rng, lo, hi);
  return v;
}

Matrix random_matrix(Philox& rng, Eigen::Index m, Eigen::Index n, double lo, double hi) {
  Matrix a(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = uniform_in(rng, lo, hi);
  }
  return a;
}

// Multiplies every entry by exp(s u) with u uniform on [-1, 1].
template <class T>
T jitter(Philox& rng, const T& a, double s) {
  T out = a;
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    out.data()[k] *= std::exp(s * uniform_in(rng, -1.0, 1.0));
  }
  return out;
}

InequalityRecord record(int instance, const char* kind, double lhs, double rhs) {
  return {instance, kind, lhs, rhs, lhs <= rhs};
}

SweepReport collect(std::vector<std::vector<InequalityRecord>> parts) {
  SweepReport rep;
  for (auto& part : parts) {
    for (auto& r : part) {
      if (!r.holds) ++rep.violations;
      rep.records.push_back(std::move(r));
    }
  }
  return rep;
}

}  // namespace

SweepReport run_stability_sweep(int instances, std::uint64_t seed, int workers) {
  auto parts = parallel_map<std::vector<InequalityRecord>>(instances, workers, [&](int k) {
    Philox rng(seed, derive_stream(static_cast<std::uint64_t>(k), kStabilityStream));
    const int m = int_in(rng, 4, 12);
    const int n = int_in(rng, 4, 12);
    const Matrix R = random_matrix(rng, m, n, 0.2, 2.0);
    const Vector p = random_vector(rng, m, 0.2, 2.0);
    const Vector q = random_vector(rng, n, 0.2, 2.0);

    Matrix R2;
    Vector p2, q2;
    if (k % 4 == 3) {
      R2 = random_matrix(rng, m, n, 0.2, 2.0);
      p2 = random_vector(rng, m, 0.2, 2.0);
      q2 = random_vector(rng, n, 0.2, 2.0);
    } else {
      // Perturbation sizes spread over three decades.
      const double s = std::pow(10.0, uniform_in(rng, -3.0, 0.0));
      R2 = jitter(rng, R, s);
      p2 = jitter(rng, p, s);
      q2 = jitter(rng, q, s);
    }

    const Matrix pi = discrete_bridge(R, p, q);
    std::vector<InequalityRecord> out;
    const Matrix pi_kernel = discrete_bridge(R2, p, q);
    out.push_back(record(k, "kernel", discrete_hellinger(pi, pi_kernel),
                         kernel_stability_rhs(R, R2, p, q)));
    const Matrix pi_margin = discrete_bridge(R, p2, q2);
    const double dm = discrete_hellinger(pi, pi_margin);
    out.push_back(record(k, "margin", dm * dm, margin_stability_rhs(R, p, q, p2, q2)));
    const Matrix pi_total = discrete_bridge(R2, p2, q2);
    const double dt = discrete_hellinger(pi, pi_total);
    out.push_back(record(k, "total", dt * dt, total_stability_rhs(R, p, q, R2, p2, q2)));
    return out;
  });
  return collect(std::move(parts));
}

SweepReport run_potential_sweep(int instances, std::uint64_t seed, int workers) {
  auto parts = parallel_map<std::vector<InequalityRecord>>(instances, workers, [&](int k) {
    Philox rng(seed, derive_stream(static_cast<std::uint64_t>(k), kPotentialStream));
    const int m = int_in(rng, 3, 12);
    const int n = int_in(rng, 3, 12);
    const Matrix B = random_matrix(rng, m, n, 0.2, 2.0);
    const Vector r = random_vector(rng, m, 0.5, 2.0);
    Vector c = random_vector(rng, n, 0.5, 2.0);
    c *= r.sum() / c.sum();
    const MarginPair margins = MarginPair::make(r, c);

    SinkhornOptions opt;
    opt.tol = 1e-14;
    opt.max_iter = 1000000;
    const Matrix A0 = sinkhorn_scale({B, margins}, opt).rescaled;
    // Relative entry perturbations of size up to a fraction of eps_max keep
    // the margin error below eps_max.
    const double eps_max = 1.0 / (50.0 * std::pow(stability_constant_CA(A0, margins), 2));
    const double size = uniform_in(rng, 0.01, 0.9) * eps_max;
    Matrix A = A0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) A(i, j) *= 1.0 + size * uniform_in(rng, -1.0, 1.0);
    }

    std::vector<InequalityRecord> out;
    const PotentialStabilityReport rep = potential_stability_check(A, margins);
    if (!rep.within_eps_max) {
      out.push_back({k, "potential_skipped", rep.actual, rep.bound, true});
      return out;
    }
    out.push_back(record(k, "potential", rep.actual, rep.bound));
    return out;
  });
  SweepReport rep = collect(std::move(parts));
  for (const auto& r : rep.records) {
    if (r.kind == "potential_skipped") ++rep.skipped;
  }
  return rep;
}

SweepReport run_sandwich_sweep(int instances, std::uint64_t seed) {
  SweepReport rep;
  for (int k = 0; k < instances; ++k) {
    Philox rng(seed, derive_stream(static_cast<std::uint64_t>(k), kSandwichStream));
    double dh = 0.0;
    double tv = 0.0;
    // Sparse supports make some pairs far apart, dense ones close.
    auto draw_values = [&](Eigen::Index size, double zero_prob) {
      Vector v(size);
      for (Eigen::Index i = 0; i < size; ++i) {
        v(i) = rng.uniform() < zero_prob ? 0.0 : rng.uniform();
      }
      if (v.sum() == 0.0) v(0) = 1.0;
      return v;
    };
    const double zero_prob = uniform_in(rng, 0.0, 0.8);
    if (k % 2 == 0) {
      const Eigen::Index m = int_in(rng, 1, 40);
      const GridDensity1D p = histogram_density_1d(draw_values(m, zero_prob), 1.0);
      const GridDensity1D q0 = histogram_density_1d(draw_values(m, zero_prob), 1.0);
      GridDensity1D pp{p.values / p.mass()};
      GridDensity1D qq{q0.values / q0.mass()};
      dh = hellinger(pp, qq);
      tv = total_variation(pp, qq);
    } else {
      const Eigen::Index m = int_in(rng, 1, 12);
      const Eigen::Index n = int_in(rng, 1, 12);
      Vector a = draw_values(m * n, zero_prob);
      Vector b = draw_values(m * n, zero_prob);
      const Matrix pa = Eigen::Map<Matrix>(a.data(), m, n);
      const Matrix pb = Eigen::Map<Matrix>(b.data(), m, n);
      const GridDensity2D p = kernel_density_2d(pa, pa.sum());
      const GridDensity2D q = kernel_density_2d(pb, pb.sum());
      dh = hellinger(p, q);
      tv = total_variation(p, q);
    }
    // Relative slack for rounding at equality (disjoint supports).
    const double slack = 1e-12;
    rep.records.push_back({k, "hellinger_sq_le_tv", dh * dh, tv, dh * dh <= tv + slack});
    rep.records.push_back({k, "tv_le_2sqrt2_hellinger", tv, 2.0 * std::sqrt(2.0) * dh,
                           tv <= 2.0 * std::sqrt(2.0) * dh + slack});
  }
  for (const auto& r : rep.records) {
    if (!r.holds) ++rep.violations;
  }
  return rep;
}

SweepReport run_containment_sweep(int instances, std::uint64_t seed, int workers) {
  auto parts = parallel_map<std::vector<InequalityRecord>>(instances, workers, [&](int k) {
    Philox rng(seed, derive_stream(static_cast<std::uint64_t>(k), kContainStream));
    const int m = int_in(rng, 2, 12);
    const int n = int_in(rng, 2, 12);
    const double spread = uniform_in(rng, 0.0, 3.0);
    Matrix lambda(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) lambda(i, j) = std::exp(spread * uniform_in(rng, -1.0, 1.0));
    }
    const Vector r = random_vector(rng, m, 0.2, 3.0);
    Vector c = random_vector(rng, n, 0.2, 3.0);
    c *= r.sum() / c.sum();
    const ScalingProblem problem{lambda, MarginPair::make(r, c)};
    SinkhornOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 1000000;
    const ScalingResult res = sinkhorn_scale(problem, opt);
    const PotentialBounds b = potential_bounds(problem);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double s = res.potentials.alpha(i) + res.potentials.beta(j);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
    // Tolerance covers the 1e-12 margin error of the iterate.
    std::vector<InequalityRecord> out;
    out.push_back({k, "lower", b.lower, lo, b.lower <= lo + 1e-9});
    out.push_back({k, "upper", hi, b.upper, hi <= b.upper + 1e-9});
    return out;
  });
  return collect(std::move(parts));
}

ScalabilityAgreement run_scalability_agreement(int instances, std::uint64_t seed) {
  ScalabilityAgreement rep;
  rep.instances = instances;
  for (int k = 0; k < instances; ++k) {
    Philox rng(seed, derive_stream(static_cast<std::uint64_t>(k), kPatternStream));
    const std::uint32_t pattern = rng() & 0x1ffu;
    Matrix a(3, 3);
    for (int e = 0; e < 9; ++e) a(e / 3, e % 3) = (pattern >> e) & 1u ? 1.0 : 0.0;
    const Vector r = random_vector(rng, 3, 0.5, 2.0);
    Vector c = random_vector(rng, 3, 0.5, 2.0);
    c *= r.sum() / c.sum();
    const MarginPair margins = MarginPair::make(r, c);

    const bool exact = check_scalability(a, margins, ScalabilityMode::Exact).scalable;
    bool converged = true;
    try {
      SinkhornOptions opt;
      opt.tol = 1e-8;
      opt.max_iter = 100000;
      sinkhorn_scale({a, margins}, opt);
    } catch (const Error&) {
      converged = false;
    }
    rep.exact_scalable += exact;
    if (exact == converged) {
      ++rep.agree;
    } else {
      rep.disagreeing.push_back(k);
    }
  }
  return rep;
}

}  // namespace sinkbridge
