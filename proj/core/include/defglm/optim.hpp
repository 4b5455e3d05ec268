#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "defglm/dropout.hpp"
#include "defglm/model.hpp"
#include "defglm/rng.hpp"

namespace defglm {

struct OptimConfig {
  int batch_size = 30;
  long max_iterations = 200000;
  /// Full-data objective is evaluated every `trace_every` iterations.
  int trace_every = 100;
  /// Stationarity: relative change of the windowed mean objective between
  /// consecutive windows of this many iterations.
  int stationarity_window = 200;
  double stationarity_tol = 1e-6;
  double rho = 0.95;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  /// |z'alpha| bound applied while fitting.
  double max_abs_disp_predictor = 15.0;
  bool update_alpha = true;
  /// Ridge warm start for beta and alpha = 0; otherwise start from spec.beta and spec.alpha.
  bool warm_start = true;
  /// Apply a quadratic coefficient penalty through an implicit step with the
  /// ADADELTA per-coordinate rates instead of adding its gradient explicitly.
  /// The explicit form drifts into a growing zigzag once lambda * ||P|| is
  /// large compared with the likelihood curvature.
  bool implicit_penalty = true;

  void validate(Eigen::Index rows) const;
};

struct AdadeltaState {
  Eigen::VectorXd mean_sq_grad;
  Eigen::VectorXd mean_sq_update;

  AdadeltaState() = default;
  explicit AdadeltaState(Eigen::Index dim)
      : mean_sq_grad(Eigen::VectorXd::Zero(dim)), mean_sq_update(Eigen::VectorXd::Zero(dim)) {}
};

/// One ADADELTA update for a gradient of an objective being minimised.
/// Returns the step to add to the parameters and advances the accumulators.
Eigen::VectorXd adadelta_step(AdadeltaState& state, const Eigen::VectorXd& gradient, double rho,
                              double epsilon);

/// The two halves of adadelta_step: fold g into E[g^2] and return the
/// per-coordinate rates sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps), then fold
/// the step actually taken into E[dx^2].
Eigen::VectorXd adadelta_rates(AdadeltaState& state, const Eigen::VectorXd& gradient, double rho,
                               double epsilon);
void adadelta_commit(AdadeltaState& state, const Eigen::VectorXd& update, double rho);

/// Moves b distinct, uniformly chosen entries of `order` to its front by a
/// partial Fisher-Yates shuffle. The rest of `order` stays a permutation.
void sample_batch(std::vector<int>& order, int b, Rng& rng);

/// Quadratic coefficient penalty lambda_mu b'P_mu b + lambda_gamma a'P_gamma a,
/// subtracted from the log-likelihood during fitting.
struct CoefficientPenalty {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd disp;
  double lambda_mean = 0.0;
  double lambda_disp = 0.0;

  double value(const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha) const;
};

enum class Termination { max_iterations, stationary, diverged };
std::string_view to_string(Termination t);

struct TracePoint {
  long iteration = 0;
  double objective = 0.0;  ///< full-data log-likelihood minus any coefficient penalty
};

struct FitResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  long iterations = 0;
  std::vector<TracePoint> trace;
  Termination termination = Termination::max_iterations;
  long rejected_steps = 0;
  bool diverged = false;
};

/// Ridge-stabilised least squares of the link-transformed response on X.
Eigen::VectorXd warm_start_beta(const GlmSpec& spec, const Eigen::VectorXd& y);

/// Stochastic gradient ascent on the dropout-perturbed log-likelihood.
/// Each iteration draws b distinct rows uniformly, perturbs their features
/// with fresh independent noise per row, and applies separate ADADELTA
/// updates to beta and alpha using the batch score scaled by n/b.
FitResult fit(const GlmSpec& spec, const Eigen::VectorXd& y, const NoiseSpec& noise,
              const OptimConfig& config, Rng& rng, const CoefficientPenalty* penalty = nullptr);

}  // namespace defglm
