#include "sinkbridge/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace sinkbridge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_grid(Eigen::Index a, Eigen::Index b) {
  if (a != b) throw Error(ErrorCode::GridMismatch, "densities live on different grids");
}

void require_same_grid(const GridDensity2D& p, const GridDensity2D& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw Error(ErrorCode::GridMismatch, "densities live on different grids");
  }
}

template <typename Array>
double hellinger_sq(const Array& p, const Array& q, double cell) {
  return ((p.array().sqrt() - q.array().sqrt()).square().sum()) * cell;
}

template <typename Array>
double kl_cells(const Array& p, const Array& q, double cell) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double pk = p.data()[k];
    if (pk <= 0.0) continue;
    const double qk = q.data()[k];
    if (qk <= 0.0) return kInf;
    total += pk * std::log(pk / qk);
  }
  return total * cell;
}

// 4-point Gauss–Legendre on [-1, 1].
constexpr std::array<double, 4> kNodes = {-0.8611363115940526, -0.3399810435848563,
                                          0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kWeights = {0.3478548451374538, 0.6521451548625461,
                                            0.6521451548625461, 0.3478548451374538};

}  // namespace

Eigen::Index grid_cell(double x, Eigen::Index m) {
  const double scaled = std::ceil(static_cast<double>(m) * x);
  const auto cell = static_cast<Eigen::Index>(scaled) - 1;
  return std::clamp<Eigen::Index>(cell, 0, m - 1);
}

double GridDensity1D::at(double x) const { return values(grid_cell(x, size())); }

double GridDensity2D::at(double x, double y) const {
  return values(grid_cell(x, rows()), grid_cell(y, cols()));
}

GridDensity1D histogram_density_1d(const Vector& v, double total) {
  if (!(total > 0.0)) {
    throw Error(ErrorCode::NonPositiveTotal, "histogram total must be positive");
  }
  return GridDensity1D{v * (static_cast<double>(v.size()) / total)};
}

GridDensity2D kernel_density_2d(const Matrix& m, double total) {
  if (!(total > 0.0)) {
    throw Error(ErrorCode::NonPositiveTotal, "kernel total must be positive");
  }
  const double scale = static_cast<double>(m.rows() * m.cols()) / total;
  return GridDensity2D{m * scale};
}

GridDensity1D refine(const GridDensity1D& d, Eigen::Index factor) {
  Vector out(d.size() * factor);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = d.values(i / factor);
  return GridDensity1D{out};
}

GridDensity2D refine(const GridDensity2D& d, Eigen::Index row_factor,
                     Eigen::Index col_factor) {
  Matrix out(d.rows() * row_factor, d.cols() * col_factor);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      out(i, j) = d.values(i / row_factor, j / col_factor);
    }
  }
  return GridDensity2D{out};
}

double hellinger(const GridDensity1D& p, const GridDensity1D& q) {
  require_same_grid(p.size(), q.size());
  return std::sqrt(hellinger_sq(p.values, q.values, p.cell_measure()));
}

double hellinger(const GridDensity2D& p, const GridDensity2D& q) {
  require_same_grid(p, q);
  return std::sqrt(hellinger_sq(p.values, q.values, p.cell_measure()));
}

double total_variation(const GridDensity1D& p, const GridDensity1D& q) {
  require_same_grid(p.size(), q.size());
  return (p.values - q.values).cwiseAbs().sum() * p.cell_measure();
}

double total_variation(const GridDensity2D& p, const GridDensity2D& q) {
  require_same_grid(p, q);
  return (p.values - q.values).cwiseAbs().sum() * p.cell_measure();
}

double l1_density_distance(const GridDensity1D& p, const GridDensity1D& q) {
  return total_variation(p, q);
}

double l1_density_distance(const GridDensity2D& p, const GridDensity2D& q) {
  return total_variation(p, q);
}

double kl_divergence(const GridDensity1D& p, const GridDensity1D& q) {
  require_same_grid(p.size(), q.size());
  return kl_cells(p.values, q.values, p.cell_measure());
}

double kl_divergence(const GridDensity2D& p, const GridDensity2D& q) {
  require_same_grid(p, q);
  return kl_cells(p.values, q.values, p.cell_measure());
}

double discrete_hellinger(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw Error(ErrorCode::GridMismatch, "arrays differ in shape");
  }
  const double sp = p.sum();
  const double sq = q.sum();
  return std::sqrt(hellinger_sq(p / sp, q / sq, 1.0));
}

double delta_smoothness(const MarginPair& margins) {
  if (!margins.strictly_positive()) {
    throw Error(ErrorCode::NonPositiveMargin, "delta-smoothness needs positive margins");
  }
  const double N = margins.N;
  const auto m = static_cast<double>(margins.rows());
  const auto n = static_cast<double>(margins.cols());
  const double r_lo = margins.r.minCoeff() * m / N;
  const double r_hi = N / (m * margins.r.maxCoeff());
  const double c_lo = margins.c.minCoeff() * n / N;
  const double c_hi = N / (n * margins.c.maxCoeff());
  return std::min({r_lo, r_hi, c_lo, c_hi});
}

double cost_bound_K(const ScalingProblem& problem) {
  problem.validate();
  const Matrix& lambda = problem.lambda;
  const MarginPair& mg = problem.margins;
  if ((lambda.array() <= 0.0).any()) {
    throw Error(ErrorCode::ZeroEntry, "bounded cost requires a strictly positive mean");
  }
  const double mass = lambda.sum();
  const double n2 = mg.N * mg.N;
  double k = 0.0;
  for (Eigen::Index j = 0; j < lambda.cols(); ++j) {
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
      const double ratio = mg.r(i) * mg.c(j) * mass / (lambda(i, j) * n2);
      k = std::max(k, std::abs(std::log(ratio)));
    }
  }
  return k;
}

TestFunction test_function(const std::string& name) {
  using std::numbers::pi;
  if (name == "constant") return {name, [](double, double) { return 1.0; }, 1.0};
  if (name == "coordinate_x") return {name, [](double x, double) { return x; }, 1.0};
  if (name == "coordinate_y") return {name, [](double, double y) { return y; }, 1.0};
  if (name == "product_xy") return {name, [](double x, double y) { return x * y; }, 1.0};
  if (name == "cosine_bump") {
    // Smooth bump centred at (1/2, 1/2), vanishing on the boundary.
    return {name,
            [](double x, double y) {
              return 0.25 * (1.0 - std::cos(2.0 * pi * x)) *
                     (1.0 - std::cos(2.0 * pi * y));
            },
            1.0};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown test function '" + name + "'");
}

std::vector<std::string> test_function_names() {
  return {"constant", "coordinate_x", "coordinate_y", "product_xy", "cosine_bump"};
}

double integrate_test(const TestFunctionFn& g, const GridDensity2D& d) {
  const Eigen::Index m = d.rows();
  const Eigen::Index n = d.cols();
  const double hx = 1.0 / static_cast<double>(m);
  const double hy = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double y0 = static_cast<double>(j) * hy;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = d.values(i, j);
      if (v == 0.0) continue;
      const double x0 = static_cast<double>(i) * hx;
      double cell = 0.0;
      for (std::size_t a = 0; a < kNodes.size(); ++a) {
        const double x = x0 + 0.5 * hx * (kNodes[a] + 1.0);
        for (std::size_t b = 0; b < kNodes.size(); ++b) {
          const double y = y0 + 0.5 * hy * (kNodes[b] + 1.0);
          cell += kWeights[a] * kWeights[b] * g(x, y);
        }
      }
      total += v * cell * 0.25 * hx * hy;
    }
  }
  return total;
}

}  // namespace sinkbridge
