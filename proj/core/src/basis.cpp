#include "defglm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "defglm/errors.hpp"

namespace defglm {

namespace {

// Centred cardinal cubic B-spline on [-2, 2] and its first two derivatives.
double cardinal(double t, int derivative) {
  const double a = std::abs(t);
  if (a >= 2.0) return 0.0;
  const double sign = t < 0.0 ? -1.0 : 1.0;
  if (a < 1.0) {
    switch (derivative) {
      case 0:
        return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
      case 1:
        return sign * (-2.0 * a + 1.5 * a * a);
      default:
        return -2.0 + 3.0 * a;
    }
  }
  const double r = 2.0 - a;
  switch (derivative) {
    case 0:
      return r * r * r / 6.0;
    case 1:
      return -sign * 0.5 * r * r;
    default:
      return r;
  }
}

}  // namespace

std::string_view to_string(BoundaryMode mode) {
  return mode == BoundaryMode::natural ? "natural" : "cyclic";
}

BoundaryMode boundary_mode_from_string(std::string_view name) {
  if (name == "natural") return BoundaryMode::natural;
  if (name == "cyclic") return BoundaryMode::cyclic;
  throw ConfigError("unknown boundary mode '" + std::string(name) + "'");
}

SplineBasis::SplineBasis(double lower, double upper, int knots, BoundaryMode mode)
    : lower_(lower), upper_(upper), knots_(knots), mode_(mode) {
  if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper)) {
    throw ConfigError("spline domain needs finite a < b");
  }
  if (knots < 4) {
    throw ConfigError("spline basis needs at least 4 knots, got " + std::to_string(knots));
  }
  spacing_ = mode == BoundaryMode::natural ? (upper - lower) / (knots - 1)
                                           : (upper - lower) / knots;
}

std::vector<double> SplineBasis::knot_positions() const {
  std::vector<double> out(static_cast<std::size_t>(knots_));
  for (int k = 0; k < knots_; ++k) out[static_cast<std::size_t>(k)] = lower_ + k * spacing_;
  if (mode_ == BoundaryMode::natural) out.back() = upper_;
  return out;
}

double SplineBasis::wrap(double x) const {
  const double period = upper_ - lower_;
  double r = std::fmod(x - lower_, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

void SplineBasis::evaluate(double x, std::span<double> out, int derivative) const {
  if (out.size() != static_cast<std::size_t>(knots_)) {
    throw ConfigError("basis output span has wrong length");
  }
  if (derivative < 0 || derivative > 2) {
    throw ConfigError("only derivatives of order 0..2 are available");
  }
  for (double& v : out) v = 0.0;
  const double dscale = std::pow(1.0 / spacing_, derivative);

  if (mode_ == BoundaryMode::cyclic) {
    if (!std::isfinite(x)) throw DomainError("cannot evaluate basis at non-finite x");
    const double u = wrap(x) / spacing_;
    const int base = static_cast<int>(std::floor(u));
    for (int off = -1; off <= 2; ++off) {
      const int j = base + off;
      const double v = cardinal(u - j, derivative);
      const int idx = ((j % knots_) + knots_) % knots_;
      out[static_cast<std::size_t>(idx)] += v * dscale;
    }
    return;
  }

  const double tol = 1e-10 * (upper_ - lower_);
  if (!(x >= lower_ - tol && x <= upper_ + tol)) {
    std::ostringstream msg;
    msg << "x=" << x << " outside natural spline domain [" << lower_ << ", " << upper_ << "]";
    throw DomainError(msg.str());
  }
  const double u = std::clamp((x - lower_) / spacing_, 0.0, static_cast<double>(knots_ - 1));
  const int m = knots_;
  const int base = static_cast<int>(std::floor(u));
  // Full basis indices run from -1 to m; only base-1..base+2 can be nonzero.
  for (int j = base - 1; j <= base + 2; ++j) {
    if (j < -1 || j > m) continue;
    const double v = cardinal(u - j, derivative) * dscale;
    if (v == 0.0) continue;
    if (j == -1) {
      out[0] += 2.0 * v;
      out[1] -= v;
    } else if (j == m) {
      out[static_cast<std::size_t>(m - 1)] += 2.0 * v;
      out[static_cast<std::size_t>(m - 2)] -= v;
    } else {
      out[static_cast<std::size_t>(j)] += v;
    }
  }
}

Eigen::VectorXd SplineBasis::evaluate(double x, int derivative) const {
  Eigen::VectorXd row(knots_);
  evaluate(x, std::span<double>(row.data(), static_cast<std::size_t>(row.size())), derivative);
  return row;
}

Eigen::MatrixXd design_matrix(const SplineBasis& basis, std::span<const double> x) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), basis.dimension());
  Eigen::VectorXd row(basis.dimension());
  for (std::size_t i = 0; i < x.size(); ++i) {
    basis.evaluate(x[i], std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

std::vector<double> evaluate_effect(const SplineBasis& basis, const Eigen::VectorXd& coefficients,
                                    std::span<const double> grid) {
  if (coefficients.size() != basis.dimension()) {
    throw ConfigError("coefficient length " + std::to_string(coefficients.size()) +
                      " does not match basis dimension " + std::to_string(basis.dimension()));
  }
  std::vector<double> out(grid.size());
  Eigen::VectorXd row(basis.dimension());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    basis.evaluate(grid[i], std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
    out[i] = row.dot(coefficients);
  }
  return out;
}

std::vector<double> uniform_grid(double lower, double upper, int intervals) {
  if (intervals < 1) throw ConfigError("grid needs at least one interval");
  std::vector<double> out(static_cast<std::size_t>(intervals) + 1);
  for (int k = 0; k <= intervals; ++k) {
    out[static_cast<std::size_t>(k)] = lower + (upper - lower) * k / intervals;
  }
  out.back() = upper;
  return out;
}

}  // namespace defglm
