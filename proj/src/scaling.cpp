#include "sinkbridge/scaling.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <sstream>

namespace sinkbridge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shapes " << a.rows() << "x" << a.cols() << " and "
       << b.rows() << "x" << b.cols() << " differ";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void require_matching(const Matrix& a, const MarginPair& margins,
                      const char* what) {
  if (a.rows() != margins.rows() || a.cols() != margins.cols()) {
    std::ostringstream os;
    os << what << ": matrix is " << a.rows() << "x" << a.cols()
       << " but margins are " << margins.rows() << "x" << margins.cols();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void require_positive_margins(const MarginPair& margins) {
  if (!margins.strictly_positive()) {
    throw Error(ErrorCode::NonPositiveMargin,
                "margins must be strictly positive");
  }
}

// log(sum_j lambda(i, j) exp(beta(j))) for every row i, shifted by max(beta)
// so no exponent exceeds zero.
Vector log_row_sums(const Matrix& lambda, const Vector& beta) {
  const double shift = beta.maxCoeff();
  const Vector scaled = (beta.array() - shift).exp().matrix();
  return (lambda * scaled).array().log() + shift;
}

Vector log_col_sums(const Matrix& lambda, const Vector& alpha) {
  const double shift = alpha.maxCoeff();
  const Vector scaled = (alpha.array() - shift).exp().matrix();
  return (lambda.transpose() * scaled).array().log() + shift;
}

}  // namespace

MarginPair MarginPair::make(Vector r, Vector c) {
  if ((r.array() < 0.0).any() || (c.array() < 0.0).any()) {
    throw Error(ErrorCode::NonPositiveMargin, "margins must be nonnegative");
  }
  const double sr = r.sum();
  const double sc = c.sum();
  if (std::abs(sr - sc) > 1e-9 * std::max({std::abs(sr), std::abs(sc), 1e-300})) {
    std::ostringstream os;
    os.precision(17);
    os << "row total " << sr << " differs from column total " << sc;
    throw Error(ErrorCode::InfeasibleSpec, os.str());
  }
  MarginPair out;
  out.r = std::move(r);
  out.c = std::move(c);
  out.N = sr;
  return out;
}

MarginPair MarginPair::uniform(Eigen::Index m, Eigen::Index n, double row_value,
                               double col_value) {
  return make(Vector::Constant(m, row_value), Vector::Constant(n, col_value));
}

bool MarginPair::strictly_positive() const {
  return r.size() > 0 && c.size() > 0 && (r.array() > 0.0).all() &&
         (c.array() > 0.0).all();
}

void ScalingProblem::validate() const {
  require_matching(lambda, margins, "scaling problem");
  if ((lambda.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "lambda has negative entries");
  }
}

const char* to_string(Gauge gauge) {
  switch (gauge) {
    case Gauge::BetaCWeighted: return "BetaCWeighted";
    case Gauge::MaxEqualized: return "MaxEqualized";
    case Gauge::KernelOrthogonal: return "KernelOrthogonal";
  }
  return "BetaCWeighted";
}

Gauge gauge_from_string(const std::string& name) {
  if (name == "BetaCWeighted") return Gauge::BetaCWeighted;
  if (name == "MaxEqualized") return Gauge::MaxEqualized;
  if (name == "KernelOrthogonal") return Gauge::KernelOrthogonal;
  throw Error(ErrorCode::InvalidArgument, "unknown gauge '" + name + "'");
}

Matrix apply_potentials(const Matrix& lambda, const Potentials& pot) {
  if (lambda.rows() != pot.alpha.size() || lambda.cols() != pot.beta.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "potentials do not match matrix shape");
  }
  Matrix out(lambda.rows(), lambda.cols());
  for (Eigen::Index j = 0; j < lambda.cols(); ++j) {
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
      out(i, j) = std::exp(pot.alpha(i) + pot.beta(j)) * lambda(i, j);
    }
  }
  return out;
}

double max_relative_margin_error(const Matrix& x, const MarginPair& margins) {
  require_matching(x, margins, "margin error");
  const Vector rows = x.rowwise().sum();
  const Vector cols = x.colwise().sum().transpose();
  double err = 0.0;
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    err = std::max(err, std::abs(rows(i) - margins.r(i)) / margins.r(i));
  }
  for (Eigen::Index j = 0; j < cols.size(); ++j) {
    err = std::max(err, std::abs(cols(j) - margins.c(j)) / margins.c(j));
  }
  return err;
}

ScalingResult sinkhorn_scale(const ScalingProblem& problem,
                             const SinkhornOptions& options) {
  problem.validate();
  const MarginPair& mg = problem.margins;
  require_positive_margins(mg);
  const Matrix& lambda = problem.lambda;
  const Vector log_r = mg.r.array().log();
  const Vector log_c = mg.c.array().log();

  Vector alpha = Vector::Zero(lambda.rows());
  Vector beta = Vector::Zero(lambda.cols());

  auto finish = [&](int iterations) {
    ScalingResult res;
    res.potentials = gauge_fix(Potentials{alpha, beta, options.gauge}, mg,
                               options.gauge);
    res.rescaled = apply_potentials(lambda, res.potentials);
    res.iterations = iterations;
    res.final_margin_error = max_relative_margin_error(res.rescaled, mg);
    return res;
  };

  Vector log_cols = log_col_sums(lambda, alpha);
  for (int it = 1; it <= options.max_iter; ++it) {
    if (!log_cols.allFinite()) {
      throw MaxIterationsError("zero column in the support; not scalable",
                               finish(it - 1));
    }
    beta = log_c - log_cols;
    const Vector log_rows = log_row_sums(lambda, beta);
    if (!log_rows.allFinite()) {
      throw MaxIterationsError("zero row in the support; not scalable",
                               finish(it - 1));
    }
    alpha = log_r - log_rows;
    if (options.on_sweep) options.on_sweep(it, alpha, beta);

    // Rows are exact after the alpha update; the column residual reuses the
    // column sums needed by the next beta update.
    log_cols = log_col_sums(lambda, alpha);
    double col_err = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      col_err = std::max(col_err, std::abs(std::expm1(beta(j) + log_cols(j) -
                                                      log_c(j))));
    }
    if (col_err <= options.tol) {
      ScalingResult res = finish(it);
      if (res.final_margin_error <= options.tol) return res;
    }
  }
  std::ostringstream os;
  os << "Sinkhorn did not reach tol " << options.tol << " within "
     << options.max_iter << " iterations";
  throw MaxIterationsError(os.str(), finish(options.max_iter));
}

double dual_objective(const ScalingProblem& problem, const Potentials& pot) {
  require_matching(problem.lambda, problem.margins, "dual objective");
  if (pot.alpha.size() != problem.lambda.rows() ||
      pot.beta.size() != problem.lambda.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "potentials do not match problem shape");
  }
  const double linear = pot.alpha.dot(problem.margins.r) +
                        pot.beta.dot(problem.margins.c);
  return linear - apply_potentials(problem.lambda, pot).sum();
}

double kl_to_reference(const Matrix& z, const Matrix& lambda) {
  require_same_shape(z, lambda, "kl_to_reference");
  double total = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double zi = z(i, j);
      if (zi <= 0.0) continue;
      if (lambda(i, j) <= 0.0) return kInf;
      total += zi * std::log(zi / lambda(i, j));
    }
  }
  return total;
}

namespace {

// Menon–Schneider: for every I with A(I^c, J) = 0 we need
// sum_I r >= sum_J c, with equality only when A(I, J^c) = 0. For fixed I the
// binding J is the largest admissible one (all columns vanishing on I^c), so
// enumerating the row subsets alone is exhaustive.
ScalabilityVerdict exact_by_rows(const Matrix& a, const Vector& r,
                                 const Vector& c, double eq_tol) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  ScalabilityVerdict verdict;
  verdict.scalable = true;
  std::vector<char> in_i(m);
  std::vector<char> in_j(n);
  const std::uint64_t subsets = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    double row_sum = 0.0;
    for (int i = 0; i < m; ++i) {
      in_i[i] = (mask >> i) & 1U;
      if (in_i[i]) row_sum += r(i);
    }
    double col_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      bool vanishes = true;
      for (int i = 0; i < m && vanishes; ++i) {
        if (!in_i[i] && a(i, j) != 0.0) vanishes = false;
      }
      in_j[j] = vanishes;
      if (vanishes) col_sum += c(j);
    }
    bool violated = row_sum < col_sum - eq_tol;
    if (!violated && std::abs(row_sum - col_sum) <= eq_tol) {
      for (int i = 0; i < m && !violated; ++i) {
        if (!in_i[i]) continue;
        for (int j = 0; j < n; ++j) {
          if (!in_j[j] && a(i, j) != 0.0) {
            violated = true;
            break;
          }
        }
      }
    }
    if (violated) {
      verdict.scalable = false;
      for (int i = 0; i < m; ++i) {
        if (in_i[i]) verdict.witness_rows.push_back(i);
      }
      for (int j = 0; j < n; ++j) {
        if (in_j[j]) verdict.witness_cols.push_back(j);
      }
      return verdict;
    }
  }
  return verdict;
}

std::vector<int> complement(const std::vector<int>& set, int size) {
  std::vector<int> out;
  std::size_t k = 0;
  for (int i = 0; i < size; ++i) {
    if (k < set.size() && set[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

// The condition is invariant under transposition with (I, J) mapped to
// (J^c, I^c), so the shorter side is enumerated.
ScalabilityVerdict exact_scalability(const Matrix& a, const MarginPair& mg) {
  const double eq_tol = 1e-12 * std::max(mg.N, 1e-300);
  if (a.rows() <= a.cols()) return exact_by_rows(a, mg.r, mg.c, eq_tol);
  ScalabilityVerdict t = exact_by_rows(a.transpose(), mg.c, mg.r, eq_tol);
  if (!t.scalable) {
    std::vector<int> rows = complement(t.witness_cols, static_cast<int>(a.rows()));
    std::vector<int> cols = complement(t.witness_rows, static_cast<int>(a.cols()));
    t.witness_rows = std::move(rows);
    t.witness_cols = std::move(cols);
  }
  return t;
}

}  // namespace

ScalabilityVerdict check_scalability(const Matrix& a, const MarginPair& margins,
                                     ScalabilityMode mode) {
  require_matching(a, margins, "check_scalability");
  require_positive_margins(margins);
  if ((a.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "matrix has negative entries");
  }
  const bool small = a.rows() + a.cols() <= kExactScalabilityCap;
  if (mode == ScalabilityMode::Exact) {
    if (!small) {
      throw Error(ErrorCode::TooLargeForExact,
                  "exact scalability check requires m + n <= 40");
    }
    return exact_scalability(a, margins);
  }
  if (small) return exact_scalability(a, margins);
  ScalabilityVerdict verdict;
  if ((a.array() > 0.0).all()) {
    verdict.scalable = true;
    return verdict;
  }
  verdict.heuristic = true;
  try {
    SinkhornOptions opts;
    opts.tol = 1e-8;
    opts.max_iter = 100000;
    sinkhorn_scale(ScalingProblem{a, margins}, opts);
    verdict.scalable = true;
  } catch (const MaxIterationsError&) {
    verdict.scalable = false;
  }
  return verdict;
}

Potentials shift_potentials(const Potentials& pot, double s) {
  Potentials out = pot;
  out.alpha.array() -= s;
  out.beta.array() += s;
  return out;
}

Potentials gauge_fix(const Potentials& pot, const MarginPair& margins,
                     Gauge gauge) {
  double s = 0.0;
  switch (gauge) {
    case Gauge::BetaCWeighted:
      if (pot.beta.size() != margins.c.size()) {
        throw Error(ErrorCode::DimensionMismatch, "beta and c differ in size");
      }
      s = -pot.beta.dot(margins.c) / margins.N;
      break;
    case Gauge::MaxEqualized:
      s = 0.5 * (pot.alpha.maxCoeff() - pot.beta.maxCoeff());
      break;
    case Gauge::KernelOrthogonal:
      s = (pot.alpha.sum() - pot.beta.sum()) /
          static_cast<double>(pot.alpha.size() + pot.beta.size());
      break;
  }
  Potentials out = shift_potentials(pot, s);
  out.gauge = gauge;
  return out;
}

GaugeAlignment gauge_alignment(const Potentials& p1, const Potentials& p2) {
  if (p1.alpha.size() != p2.alpha.size() || p1.beta.size() != p2.beta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "potential shapes differ");
  }
  const Vector da = p1.alpha - p2.alpha;
  const Vector db = p1.beta - p2.beta;
  // max(|da + t|, |db - t|) = max(up + t, down - t) with
  // up = max(max da, -min db), down = max(-min da, max db).
  double up = -kInf;
  double down = -kInf;
  if (da.size() > 0) {
    up = std::max(up, da.maxCoeff());
    down = std::max(down, -da.minCoeff());
  }
  if (db.size() > 0) {
    up = std::max(up, -db.minCoeff());
    down = std::max(down, db.maxCoeff());
  }
  GaugeAlignment out;
  if (!std::isfinite(up) || !std::isfinite(down)) return out;
  out.t = 0.5 * (down - up);
  out.distance = 0.5 * (up + down);
  return out;
}

double gauge_distance(const Potentials& p1, const Potentials& p2) {
  return gauge_alignment(p1, p2).distance;
}

GaugeAlignment minimal_norm_gauge(const Potentials& pot) {
  Potentials zero{Vector::Zero(pot.alpha.size()), Vector::Zero(pot.beta.size()),
                  pot.gauge};
  return gauge_alignment(pot, zero);
}

PotentialBounds potential_bounds(const ScalingProblem& problem) {
  problem.validate();
  const MarginPair& mg = problem.margins;
  const Matrix& lambda = problem.lambda;
  const double mass = lambda.sum();
  if (mass <= 0.0 || mg.N <= 0.0) {
    throw Error(ErrorCode::ZeroPatternMismatch, "zero total mass");
  }
  double kappa_plus = 0.0;
  double kappa_minus = 0.0;
  for (Eigen::Index j = 0; j < lambda.cols(); ++j) {
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
      const double prod = (mg.r(i) / mg.N) * (mg.c(j) / mg.N);
      const double lam = lambda(i, j) / mass;
      if ((lam == 0.0) != (prod == 0.0)) {
        throw Error(ErrorCode::ZeroPatternMismatch,
                    "lambda(i,j) = 0 must coincide with r(i) c(j) = 0");
      }
      if (lam == 0.0) continue;  // 0/0 = 1 convention
      const double kappa = std::log(prod / lam);
      kappa_plus = std::max(kappa_plus, kappa);
      kappa_minus = std::max(kappa_minus, -kappa);
    }
  }
  const double base = std::log(mg.N / mass);
  return {-2.0 * (kappa_minus + kappa_plus) + base, 2.0 * kappa_plus + base};
}

}  // namespace sinkbridge
