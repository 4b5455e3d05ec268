#pragma once

#include <Eigen/Dense>

#include "defglm/dropout.hpp"
#include "defglm/model.hpp"
#include "defglm/optim.hpp"
#include "defglm/rng.hpp"

namespace defglm {

/// (d-2) x d second-order difference operator: (D b)_j = b_{j+2} - 2 b_{j+1} + b_j.
Eigen::MatrixXd second_difference_matrix(int dim);

/// P-spline smoothness penalty lambda_mu b'P_mu b + lambda_gamma a'P_gamma a
/// with P = D'D applied to the raw spline coefficients.
struct DiffPenalty {
  Eigen::MatrixXd mean;  ///< P_mu
  Eigen::MatrixXd disp;  ///< P_gamma
  double lambda_mean = 0.0;
  double lambda_disp = 0.0;

  DiffPenalty() = default;
  DiffPenalty(int mean_dim, int disp_dim, double lambda_mean, double lambda_disp);

  double value(const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha) const;
  CoefficientPenalty as_coefficient_penalty() const;
  void validate() const;
};

/// -sum_i l_i(beta, alpha) + lambda_mu b'P_mu b + lambda_gamma a'P_gamma a.
double pmle_objective(const GlmSpec& spec, const Eigen::VectorXd& y, const DiffPenalty& penalty);

ObjectiveGradient pmle_objective_gradient(const GlmSpec& spec, const Eigen::VectorXd& y,
                                          const DiffPenalty& penalty);

/// Minimises pmle_objective on the shared SGD/ADADELTA engine without dropout noise.
FitResult pmle_fit(const GlmSpec& spec, const Eigen::VectorXd& y, const DiffPenalty& penalty,
                   const OptimConfig& config, Rng& rng);

}  // namespace defglm
