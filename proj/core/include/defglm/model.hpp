#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "defglm/families.hpp"

namespace defglm {

/// Extended GLM with canonical mean link and log dispersion link:
///   theta_i = x_i' beta,   log gamma_i = z_i' alpha.
struct GlmSpec {
  FamilyKernel kernel = FamilyKernel::gaussian();
  Eigen::MatrixXd X;      ///< n x d_mu
  Eigen::MatrixXd Z;      ///< n x d_gamma
  Eigen::VectorXd beta;   ///< d_mu
  Eigen::VectorXd alpha;  ///< d_gamma
  double phi = 1.0;
  Eigen::VectorXd nu;     ///< n known weights; empty means all ones

  Eigen::Index rows() const { return X.rows(); }
  double scale(Eigen::Index i) const { return nu.size() == 0 ? phi : phi / nu(i); }

  /// Throws ConfigError on inconsistent dimensions or nonpositive phi/nu.
  void validate() const;
  void validate(const Eigen::VectorXd& y) const;
};

/// Log-likelihood term for one observation, C = 1, without c(y, phi/nu):
/// 0.5*eta_g + e^{eta_g} (y*eta_m - b(eta_m))/s + (1 - e^{eta_g}) T(y)/s.
double observation_loglik(const FamilyKernel& kernel, double eta_mean, double eta_disp, double y,
                          double scale);

/// Sum of observation_loglik over all rows.
double loglik(const GlmSpec& spec, const Eigen::VectorXd& y);

/// loglik plus the base-measure terms c(y_i, phi/nu_i); used for held-out
/// evaluation so values are comparable across fits. Optional row subset.
double loglik_with_base(const GlmSpec& spec, const Eigen::VectorXd& y,
                        std::span<const int> rows = {});

struct ScoreReport {
  Eigen::VectorXd score_beta;
  Eigen::VectorXd score_alpha;
  Eigen::MatrixXd hess_beta_beta;
  Eigen::MatrixXd hess_beta_alpha;  ///< d_mu x d_gamma; the alpha-beta block is its transpose
  Eigen::MatrixXd hess_alpha_alpha;
  Eigen::VectorXd w_beta;   ///< gamma_i b''(x_i'beta) / (phi/nu_i)
  Eigen::VectorXd w_alpha;  ///< observed gamma_i (T(y_i) - y_i x_i'beta + b(x_i'beta)) / (phi/nu_i)
};

ScoreReport score(const GlmSpec& spec, const Eigen::VectorXd& y);

struct FisherBlocks {
  Eigen::MatrixXd beta;   ///< (1/n) X' W X
  Eigen::MatrixXd alpha;  ///< (1/n) Z' Z, taking w_alpha = 1
};

FisherBlocks fisher_blocks(const GlmSpec& spec);

/// Unit deviance 2 (T(y) - y*theta + b(theta)) / s for each row at the
/// current beta.
Eigen::VectorXd unit_deviances(const GlmSpec& spec, const Eigen::VectorXd& y);

}  // namespace defglm
