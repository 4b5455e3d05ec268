#include "defglm/pmle.hpp"

#include <string>

#include "defglm/errors.hpp"

namespace defglm {

Eigen::MatrixXd second_difference_matrix(int dim) {
  if (dim < 3) {
    throw ConfigError("second differences need at least 3 coefficients, got " +
                      std::to_string(dim));
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(dim - 2, dim);
  for (int j = 0; j + 2 < dim; ++j) {
    D(j, j) = 1.0;
    D(j, j + 1) = -2.0;
    D(j, j + 2) = 1.0;
  }
  return D;
}

DiffPenalty::DiffPenalty(int mean_dim, int disp_dim, double lambda_mu, double lambda_gamma)
    : lambda_mean(lambda_mu), lambda_disp(lambda_gamma) {
  const Eigen::MatrixXd Dm = second_difference_matrix(mean_dim);
  const Eigen::MatrixXd Dg = second_difference_matrix(disp_dim);
  mean = Dm.transpose() * Dm;
  disp = Dg.transpose() * Dg;
  validate();
}

void DiffPenalty::validate() const {
  if (!(lambda_mean >= 0.0) || !(lambda_disp >= 0.0)) {
    throw ConfigError("smoothing parameters must be nonnegative");
  }
}

double DiffPenalty::value(const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha) const {
  return as_coefficient_penalty().value(beta, alpha);
}

CoefficientPenalty DiffPenalty::as_coefficient_penalty() const {
  return CoefficientPenalty{mean, disp, lambda_mean, lambda_disp};
}

namespace {

void check_dims(const GlmSpec& spec, const DiffPenalty& penalty) {
  if (penalty.mean.rows() != spec.X.cols() || penalty.disp.rows() != spec.Z.cols()) {
    throw ConfigError("difference penalty dimensions do not match the designs");
  }
}

}  // namespace

double pmle_objective(const GlmSpec& spec, const Eigen::VectorXd& y, const DiffPenalty& penalty) {
  check_dims(spec, penalty);
  penalty.validate();
  return -loglik(spec, y) + penalty.value(spec.beta, spec.alpha);
}

ObjectiveGradient pmle_objective_gradient(const GlmSpec& spec, const Eigen::VectorXd& y,
                                          const DiffPenalty& penalty) {
  check_dims(spec, penalty);
  penalty.validate();
  const ScoreReport s = score(spec, y);
  ObjectiveGradient out;
  out.value = -loglik(spec, y) + penalty.value(spec.beta, spec.alpha);
  out.grad_beta = -s.score_beta + 2.0 * penalty.lambda_mean * (penalty.mean * spec.beta);
  out.grad_alpha = -s.score_alpha + 2.0 * penalty.lambda_disp * (penalty.disp * spec.alpha);
  return out;
}

FitResult pmle_fit(const GlmSpec& spec, const Eigen::VectorXd& y, const DiffPenalty& penalty,
                   const OptimConfig& config, Rng& rng) {
  check_dims(spec, penalty);
  penalty.validate();
  const CoefficientPenalty p = penalty.as_coefficient_penalty();
  const bool active = penalty.lambda_mean != 0.0 || penalty.lambda_disp != 0.0;
  return fit(spec, y, NoiseSpec::none(), config, rng, active ? &p : nullptr);
}

}  // namespace defglm
