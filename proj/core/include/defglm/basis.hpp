#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace defglm {

enum class BoundaryMode { natural, cyclic };

std::string_view to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(std::string_view name);

/// Cubic B-spline basis on equidistant knots.
///
/// Dimension convention: `knots` counts the equidistant knot positions.
///  - natural: knots a = t_0 < ... < t_{m-1} = b. The m+2 uniform cubic
///    B-splines covering [a, b] are reduced to m functions by absorbing the
///    constraint f''(a) = f''(b) = 0 into the two outermost pairs:
///      B~_0 = B_0 + 2 B_{-1},   B~_1 = B_1 - B_{-1}
///    (mirrored at b). The result is nonnegative and sums to one.
///  - cyclic: m knots t_k = a + k (b - a) / m on the circle [a, b); m
///    periodic B-splines, one centred on each knot.
class SplineBasis {
 public:
  SplineBasis(double lower, double upper, int knots, BoundaryMode mode);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int knot_count() const { return knots_; }
  BoundaryMode mode() const { return mode_; }
  int dimension() const { return knots_; }
  double spacing() const { return spacing_; }
  std::vector<double> knot_positions() const;

  /// Writes B(x) (or its derivative of the given order, 0..2) into `out`,
  /// which must have dimension() entries. Cyclic bases wrap x modulo the
  /// period; natural bases reject x outside [a, b].
  void evaluate(double x, std::span<double> out, int derivative = 0) const;
  Eigen::VectorXd evaluate(double x, int derivative = 0) const;

 private:
  double wrap(double x) const;

  double lower_;
  double upper_;
  int knots_;
  BoundaryMode mode_;
  double spacing_;
};

/// Row i is B(x_i).
Eigen::MatrixXd design_matrix(const SplineBasis& basis, std::span<const double> x);

/// Pointwise B(x)' * coefficients on the grid.
std::vector<double> evaluate_effect(const SplineBasis& basis, const Eigen::VectorXd& coefficients,
                                    std::span<const double> grid);

/// Equidistant grid with `intervals` + 1 points covering [lower, upper].
std::vector<double> uniform_grid(double lower, double upper, int intervals);

}  // namespace defglm
