#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "defglm/model.hpp"
#include "defglm/rng.hpp"

namespace defglm {

enum class NoiseKind { none, bernoulli, gaussian };

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

/// Multiplicative unit-mean dropout noise for the mean (xi) and dispersion
/// (zeta) sides. Bernoulli parameters are dropout probabilities delta in
/// [0, 1) with xi = Bernoulli(1 - delta) / (1 - delta); Gaussian parameters
/// are standard deviations sigma with xi ~ N(1, sigma^2).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double mean_param = 0.0;
  double disp_param = 0.0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec bernoulli(double delta_mean, double delta_disp) {
    return {NoiseKind::bernoulli, delta_mean, delta_disp};
  }
  static NoiseSpec gaussian(double sigma_mean, double sigma_disp) {
    return {NoiseKind::gaussian, sigma_mean, sigma_disp};
  }

  /// sigma^2_mu: delta/(1-delta) for Bernoulli, sigma^2 for Gaussian.
  double variance_mean() const;
  double variance_disp() const;
  void validate() const;
};

/// Single noise multiplier with the given side parameter.
double draw_multiplier(NoiseKind kind, double param, Rng& rng);

/// Elementwise x * xi.
Eigen::VectorXd perturb(const Eigen::VectorXd& features, const Eigen::VectorXd& noise);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

/// Monte-Carlo estimate of sum_i -E[l_i(beta . xi_i, alpha . zeta_i)] with
/// fresh noise per observation per draw. Gaussian noise is sampled at the
/// linear-predictor level (x~'beta is exactly normal with variance
/// sigma^2 ||x . beta||^2), Bernoulli noise feature by feature.
McEstimate mc_dropout_objective(const GlmSpec& spec, const Eigen::VectorXd& y,
                                const NoiseSpec& noise, std::size_t draws, Rng& rng);

/// Per-observation MC estimates of gamma_i {E[b(x~_i'beta)] - b(x_i'beta)} / s_i.
/// Mean-side noise only.
std::vector<McEstimate> exact_penalty_gap(const GlmSpec& spec, const NoiseSpec& noise,
                                          std::size_t draws, Rng& rng);

/// Diagonals of the penalty and weight matrices.
struct PenaltySnapshot {
  Eigen::VectorXd W;            ///< n
  Eigen::VectorXd Theta;        ///< d_mu
  Eigen::VectorXd Gamma;        ///< d_gamma
  Eigen::VectorXd Lambda;       ///< n
  Eigen::VectorXd W_tilde;      ///< n
  Eigen::VectorXd Theta_tilde;  ///< d_mu
  std::vector<int> degenerate_mean_columns;  ///< all-zero columns of X (Theta_jj = 0)
  std::vector<int> degenerate_disp_columns;  ///< all-zero columns of Z
};

PenaltySnapshot penalty_matrices(const GlmSpec& spec, const NoiseSpec& noise);

/// E[gamma~] = exp(z'alpha + sigma^2/2 ||z . alpha||^2).
double expected_dispersion(const Eigen::VectorXd& z, const Eigen::VectorXd& alpha,
                           double variance_disp);

/// MC estimate of E[exp(z~'alpha)] under the dispersion-side noise.
McEstimate mc_expected_dispersion(const Eigen::VectorXd& z, const Eigen::VectorXd& alpha,
                                  NoiseKind kind, double disp_param, std::size_t draws, Rng& rng);

/// Closed-form dropout objective:
///   sum_i -l~_i + 1/2 s2_mu ||Theta~ beta||^2 + 1/4 s2_gamma ||Gamma alpha||^2
/// where l~_i uses the inflated dispersion E[gamma~_i].
double penalized_objective(const GlmSpec& spec, const Eigen::VectorXd& y, const NoiseSpec& noise);

struct ObjectiveGradient {
  double value = 0.0;
  Eigen::VectorXd grad_beta;
  Eigen::VectorXd grad_alpha;
};

/// Value and analytic gradient of penalized_objective, differentiating
/// through W~ (which depends on both beta and alpha).
ObjectiveGradient penalized_objective_gradient(const GlmSpec& spec, const Eigen::VectorXd& y,
                                               const NoiseSpec& noise);

/// Expected Taylor remainder for Poisson data under Gaussian mean-side noise,
/// in the form exp(x'beta) {exp(v^2/2) - v^2/2 - 1}, v = sigma^2 s^2,
/// s^2 = sum_j (x_j beta_j)^2.
double remainder_poisson(const Eigen::VectorXd& x, const Eigen::VectorXd& beta, double sigma);

/// exp(x'beta) {exp(v/2) - v/2 - 1}: E[e^X] - 1 - E[X^2]/2 for X ~ N(0, v).
double remainder_poisson_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                               double sigma);

/// Binomial bound exp(v^2/2) - v^2/2 - 1 (derivatives of b bounded by 1).
double remainder_binomial_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                                double sigma);

/// Same series argument with Gaussian even moments v^k (2k-1)!! and the
/// derivatives of N log(1 + e^t) bounded by N: N {exp(v/2) - v/2 - 1}.
double remainder_binomial_bound_scaled(const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                                       double sigma, int trials);

/// MC estimate of the true expected remainder
///   E[b(x~'beta)] - b(x'beta) - 1/2 b''(x'beta) Var[x~'beta]
/// computed draw-wise as b(eta + X) - b(eta) - b'(eta) X - b''(eta) X^2 / 2,
/// which has the same expectation and far smaller variance.
McEstimate mc_taylor_remainder(const FamilyKernel& kernel, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& beta, NoiseKind kind, double mean_param,
                               std::size_t draws, Rng& rng);

}  // namespace defglm
