#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sinkbridge/scaling.hpp"

namespace sinkbridge {

/// Piecewise-constant density on [0,1]; cell i covers ((i-1)/m, i/m].
struct GridDensity1D {
  Vector values;

  Eigen::Index size() const { return values.size(); }
  double cell_measure() const { return 1.0 / static_cast<double>(values.size()); }
  double mass() const { return values.sum() * cell_measure(); }
  /// Value at x in [0,1]; x = 0 belongs to the first cell.
  double at(double x) const;
};

/// Piecewise-constant density on [0,1]^2.
struct GridDensity2D {
  Matrix values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  double cell_measure() const {
    return 1.0 / static_cast<double>(values.rows() * values.cols());
  }
  double mass() const { return values.sum() * cell_measure(); }
  double at(double x, double y) const;
};

/// 0-based cell of x under the ceiling convention ceil(m x), with x = 0 in
/// the first cell.
Eigen::Index grid_cell(double x, Eigen::Index m);

/// values(i) = (m / total) v(i)
GridDensity1D histogram_density_1d(const Vector& v, double total);
/// values(i, j) = (m n / total) M(i, j)
GridDensity2D kernel_density_2d(const Matrix& m, double total);

/// Same density on a grid refined by integer factors.
GridDensity1D refine(const GridDensity1D& d, Eigen::Index factor);
GridDensity2D refine(const GridDensity2D& d, Eigen::Index row_factor,
                     Eigen::Index col_factor);

double hellinger(const GridDensity1D& p, const GridDensity1D& q);
double hellinger(const GridDensity2D& p, const GridDensity2D& q);

/// L1 distance of the densities (the total-variation convention without 1/2).
double total_variation(const GridDensity1D& p, const GridDensity1D& q);
double total_variation(const GridDensity2D& p, const GridDensity2D& q);

double l1_density_distance(const GridDensity1D& p, const GridDensity1D& q);
double l1_density_distance(const GridDensity2D& p, const GridDensity2D& q);

/// KL(p || q) with 0 log 0 = 0; +infinity when p is not dominated by q.
double kl_divergence(const GridDensity1D& p, const GridDensity1D& q);
double kl_divergence(const GridDensity2D& p, const GridDensity2D& q);

/// Hellinger distance of two nonnegative arrays after normalizing each to
/// unit mass.
double discrete_hellinger(const Matrix& p, const Matrix& q);

/// Largest delta with delta N/m <= r_i <= N/(delta m) and the same for c.
double delta_smoothness(const MarginPair& margins);

/// max_ij |log(r_i c_j |Lambda|_1 / (Lambda_ij N^2))|
double cost_bound_K(const ScalingProblem& problem);

using TestFunctionFn = std::function<double(double, double)>;

struct TestFunction {
  std::string name;
  TestFunctionFn g;
  double sup_norm = 1.0;
};

/// Registry: constant, coordinate_x, coordinate_y, product_xy, cosine_bump.
TestFunction test_function(const std::string& name);
std::vector<std::string> test_function_names();

/// sum over cells of d(i, j) * integral of g over the cell, each cell
/// integral by 4x4 Gauss–Legendre.
double integrate_test(const TestFunctionFn& g, const GridDensity2D& d);

}  // namespace sinkbridge
