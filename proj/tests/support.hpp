#pragma once

// Shared helpers for the test binaries: random instances and finite differences.

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "defglm/model.hpp"
#include "defglm/rng.hpp"

namespace defglm::testing {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                                     double hi) {
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = uniform(rng, lo, hi);
  return M;
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

inline FamilyKernel kernel_for(Family f, int trials = 10) {
  switch (f) {
    case Family::gaussian:
      return FamilyKernel::gaussian();
    case Family::poisson:
      return FamilyKernel::poisson();
    case Family::binomial:
      return FamilyKernel::binomial(trials);
  }
  return FamilyKernel::gaussian();
}

// Response in the family's support near the model mean, including boundary values.
inline double random_response(Rng& rng, const FamilyKernel& k, double eta) {
  switch (k.family()) {
    case Family::gaussian:
      return eta + uniform(rng, -2.0, 2.0);
    case Family::poisson: {
      const double mu = std::exp(eta);
      return std::floor(uniform(rng, 0.0, 2.0 * mu + 3.0));
    }
    case Family::binomial:
      return std::floor(uniform(rng, 0.0, k.trials() + 1.0));
  }
  return 0.0;
}

struct Instance {
  GlmSpec spec;
  Eigen::VectorXd y;
};

// Small random model with moderate linear predictors and varied weights.
inline Instance random_instance(Rng& rng, Family family, Eigen::Index n, Eigen::Index dm,
                                Eigen::Index dg, int trials = 10) {
  Instance out;
  auto& s = out.spec;
  s.kernel = kernel_for(family, trials);
  s.X = random_matrix(rng, n, dm, -1.0, 1.0);
  s.Z = random_matrix(rng, n, dg, -1.0, 1.0);
  s.beta = random_vector(rng, dm, -0.6, 0.6);
  s.alpha = random_vector(rng, dg, -0.5, 0.5);
  s.phi = family == Family::gaussian ? uniform(rng, 0.5, 2.0) : 1.0;
  s.nu = random_vector(rng, n, 0.5, 2.0);
  const Eigen::VectorXd eta = s.X * s.beta;
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.y(i) = random_response(rng, s.kernel, eta(i));
  return out;
}

// Central difference of f along coordinate j of v.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& v, Eigen::Index j, double h) {
  Eigen::VectorXd p = v, m = v;
  p(j) += h;
  m(j) -= h;
  return (f(p) - f(m)) / (2.0 * h);
}

// |a - b| / max(|b|, floor): relative error that stays meaningful near zero.
inline double rel_err(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

}  // namespace defglm::testing
