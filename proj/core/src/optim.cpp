#include "defglm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "defglm/errors.hpp"

namespace defglm {

namespace {

// Row-compressed view of a dense design. B-spline rows have at most four
// nonzeros, so the batch loop only touches (and only perturbs) those.
struct SparseRows {
  std::vector<int> start;
  std::vector<int> col;
  std::vector<double> val;

  explicit SparseRows(const Eigen::MatrixXd& M) {
    start.reserve(static_cast<std::size_t>(M.rows()) + 1);
    start.push_back(0);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        if (M(i, j) != 0.0) {
          col.push_back(static_cast<int>(j));
          val.push_back(M(i, j));
        }
      }
      start.push_back(static_cast<int>(col.size()));
    }
  }
};

double clamp_finite(double v, double lo, double hi) {
  if (std::isnan(v)) return v;
  return std::clamp(v, lo, hi);
}

// Full-data objective with the same predictor clamping used in the batch
// scores, so a transiently wild iterate yields a finite trace value.
double full_objective(const GlmSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                      const Eigen::VectorXd& alpha, double disp_bound,
                      const CoefficientPenalty* penalty) {
  const auto& k = spec.kernel;
  const Eigen::VectorXd eta_m = spec.X * beta;
  const Eigen::VectorXd eta_g = spec.Z * alpha;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double em = clamp_finite(eta_m(i), k.min_linear_predictor(), k.max_linear_predictor());
    const double eg = clamp_finite(eta_g(i), -disp_bound, disp_bound);
    total += observation_loglik(k, em, eg, y(i), spec.scale(i));
  }
  if (penalty != nullptr) total -= penalty->value(beta, alpha);
  return total;
}

int bandwidth(const Eigen::MatrixXd& P) {
  int w = 0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < P.cols(); ++j) {
      if (P(i, j) != 0.0 || P(j, i) != 0.0) w = std::max(w, static_cast<int>(j - i));
    }
  }
  return w;
}

// Implicit penalty step: solves (I + 2 lambda R P) x = c for x with R = diag(rates).
// Substituting x = R^{1/2} u gives the symmetric positive definite banded
// system (I + 2 lambda R^{1/2} P R^{1/2}) u = R^{-1/2} c, factored in place.
class ImplicitPenaltySolver {
 public:
  ImplicitPenaltySolver(const Eigen::MatrixXd& P, double lambda)
      : P_(P), lambda_(lambda), w_(bandwidth(P)), L_(P.rows(), w_ + 1) {}

  Eigen::VectorXd solve(const Eigen::VectorXd& rates, const Eigen::VectorXd& c) {
    const Eigen::Index d = rates.size();
    const Eigen::VectorXd root = rates.cwiseSqrt();
    // Band Cholesky; L_(i, k) holds L(i, i - k).
    for (Eigen::Index i = 0; i < d; ++i) {
      const Eigen::Index j0 = std::max<Eigen::Index>(0, i - w_);
      for (Eigen::Index j = j0; j <= i; ++j) {
        double v = 2.0 * lambda_ * root(i) * P_(i, j) * root(j) + (i == j ? 1.0 : 0.0);
        const Eigen::Index k0 = std::max<Eigen::Index>(j0, j - w_);
        for (Eigen::Index k = k0; k < j; ++k) v -= L_(i, i - k) * L_(j, j - k);
        if (i == j) {
          L_(i, 0) = std::sqrt(v);
        } else {
          L_(i, i - j) = v / L_(j, 0);
        }
      }
    }
    Eigen::VectorXd u = c.cwiseQuotient(root);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index k = std::max<Eigen::Index>(0, i - w_); k < i; ++k) u(i) -= L_(i, i - k) * u(k);
      u(i) /= L_(i, 0);
    }
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      for (Eigen::Index k = i + 1; k <= std::min<Eigen::Index>(d - 1, i + w_); ++k) u(i) -= L_(k, k - i) * u(k);
      u(i) /= L_(i, 0);
    }
    return root.cwiseProduct(u);
  }

 private:
  const Eigen::MatrixXd& P_;
  double lambda_;
  int w_;
  Eigen::MatrixXd L_;
};

// Applies one ADADELTA update to `coef` given the likelihood-part gradient and
// an optional quadratic penalty lambda * coef' P coef.
void update_block(Eigen::VectorXd& coef, AdadeltaState& state, const Eigen::VectorXd& loss_grad,
                  const Eigen::MatrixXd* P, double lambda, ImplicitPenaltySolver* solver,
                  const OptimConfig& config) {
  if (P == nullptr || lambda == 0.0) {
    coef += adadelta_step(state, loss_grad, config.rho, config.epsilon);
    return;
  }
  const Eigen::VectorXd full = loss_grad + 2.0 * lambda * (*P * coef);
  if (solver == nullptr) {
    coef += adadelta_step(state, full, config.rho, config.epsilon);
    return;
  }
  const Eigen::VectorXd rates = adadelta_rates(state, full, config.rho, config.epsilon);
  const Eigen::VectorXd next = solver->solve(rates, coef - rates.cwiseProduct(loss_grad));
  const Eigen::VectorXd update = next - coef;
  adadelta_commit(state, update, config.rho);
  coef = next;
}

}  // namespace

void OptimConfig::validate(Eigen::Index rows) const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (batch_size > rows) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds the " +
                      std::to_string(rows) + " available rows");
  }
  if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (trace_every < 1) throw ConfigError("trace_every must be positive");
  if (stationarity_window < 1) throw ConfigError("stationarity_window must be positive");
  if (!(stationarity_tol > 0.0)) throw ConfigError("stationarity_tol must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(max_abs_disp_predictor > 0.0)) throw ConfigError("max_abs_disp_predictor must be positive");
}

Eigen::VectorXd adadelta_rates(AdadeltaState& state, const Eigen::VectorXd& gradient, double rho,
                               double epsilon) {
  if (state.mean_sq_grad.size() != gradient.size() ||
      state.mean_sq_update.size() != gradient.size()) {
    throw ConfigError("ADADELTA accumulator and gradient lengths differ");
  }
  state.mean_sq_grad = rho * state.mean_sq_grad + (1.0 - rho) * gradient.cwiseAbs2();
  return ((state.mean_sq_update.array() + epsilon).sqrt() /
          (state.mean_sq_grad.array() + epsilon).sqrt())
      .matrix();
}

void adadelta_commit(AdadeltaState& state, const Eigen::VectorXd& update, double rho) {
  state.mean_sq_update = rho * state.mean_sq_update + (1.0 - rho) * update.cwiseAbs2();
}

Eigen::VectorXd adadelta_step(AdadeltaState& state, const Eigen::VectorXd& gradient, double rho,
                              double epsilon) {
  Eigen::VectorXd update = -(adadelta_rates(state, gradient, rho, epsilon).array() *
                             gradient.array())
                                .matrix();
  adadelta_commit(state, update, rho);
  return update;
}

void sample_batch(std::vector<int>& order, int b, Rng& rng) {
  const auto n = static_cast<int>(order.size());
  if (b < 0 || b > n) throw ConfigError("batch size outside 0..n");
  for (int j = 0; j < b; ++j) {
    const int pick = j + static_cast<int>(uniform01(rng) * static_cast<double>(n - j));
    std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(pick)]);
  }
}

double CoefficientPenalty::value(const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha) const {
  double v = 0.0;
  if (lambda_mean != 0.0) v += lambda_mean * beta.dot(mean * beta);
  if (lambda_disp != 0.0) v += lambda_disp * alpha.dot(disp * alpha);
  return v;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::max_iterations:
      return "max-iter";
    case Termination::stationary:
      return "stationary";
    case Termination::diverged:
      return "diverged";
  }
  return "unknown";
}

Eigen::VectorXd warm_start_beta(const GlmSpec& spec, const Eigen::VectorXd& y) {
  const auto& k = spec.kernel;
  Eigen::VectorXd target(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    switch (k.family()) {
      case Family::gaussian:
        target(i) = y(i);
        break;
      case Family::poisson:
        target(i) = std::log(y(i) + 0.5);
        break;
      case Family::binomial:
        target(i) = std::log((y(i) + 0.5) / (k.trials() - y(i) + 0.5));
        break;
    }
  }
  Eigen::MatrixXd gram = spec.X.transpose() * spec.X;
  const double ridge = 1e-3 * std::max(gram.diagonal().mean(), 1e-12);
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(spec.X.transpose() * target);
}

FitResult fit(const GlmSpec& spec, const Eigen::VectorXd& y, const NoiseSpec& noise,
              const OptimConfig& config, Rng& rng, const CoefficientPenalty* penalty) {
  spec.validate(y);
  noise.validate();
  const Eigen::Index n = y.size();
  config.validate(n);
  if (penalty != nullptr) {
    if (penalty->mean.rows() != spec.X.cols() || penalty->mean.cols() != spec.X.cols() ||
        penalty->disp.rows() != spec.Z.cols() || penalty->disp.cols() != spec.Z.cols()) {
      throw ConfigError("coefficient penalty matrices do not match the design dimensions");
    }
  }

  const auto& k = spec.kernel;
  const SparseRows xr(spec.X);
  const SparseRows zr(spec.Z);
  Eigen::VectorXd saturated(n);
  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    saturated(i) = k.saturated_term(y(i));
    scale(i) = spec.scale(i);
  }

  FitResult out;
  out.beta = config.warm_start ? warm_start_beta(spec, y) : spec.beta;
  out.alpha = config.warm_start ? Eigen::VectorXd::Zero(spec.Z.cols()) : spec.alpha;

  std::unique_ptr<ImplicitPenaltySolver> beta_solver;
  std::unique_ptr<ImplicitPenaltySolver> alpha_solver;
  if (penalty != nullptr && config.implicit_penalty) {
    if (penalty->lambda_mean != 0.0) {
      beta_solver = std::make_unique<ImplicitPenaltySolver>(penalty->mean, penalty->lambda_mean);
    }
    if (penalty->lambda_disp != 0.0) {
      alpha_solver = std::make_unique<ImplicitPenaltySolver>(penalty->disp, penalty->lambda_disp);
    }
  }

  AdadeltaState beta_state(spec.X.cols());
  AdadeltaState alpha_state(spec.Z.cols());
  Eigen::VectorXd grad_beta(spec.X.cols());
  Eigen::VectorXd grad_alpha(spec.Z.cols());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> xi;
  std::vector<double> zeta;

  const int b = config.batch_size;
  const double batch_scale = static_cast<double>(n) / b;
  const double eta_lo = k.min_linear_predictor();
  const double eta_hi = k.max_linear_predictor();
  const double disp_bound = config.max_abs_disp_predictor;
  const long window_points = std::max(1, config.stationarity_window / config.trace_every);

  auto record = [&](long iteration) {
    const double obj = full_objective(spec, y, out.beta, out.alpha, disp_bound, penalty);
    out.trace.push_back(TracePoint{iteration, obj});
    return obj;
  };
  auto windows_converged = [&]() {
    const auto m = static_cast<long>(out.trace.size());
    if (m < 2 * window_points) return false;
    double recent = 0.0, previous = 0.0;
    for (long t = 0; t < window_points; ++t) {
      recent += out.trace[static_cast<std::size_t>(m - 1 - t)].objective;
      previous += out.trace[static_cast<std::size_t>(m - 1 - window_points - t)].objective;
    }
    recent /= static_cast<double>(window_points);
    previous /= static_cast<double>(window_points);
    return std::abs(recent - previous) <= config.stationarity_tol * std::max(std::abs(previous), 1e-12);
  };

  if (!std::isfinite(record(0))) {
    out.diverged = true;
    out.termination = Termination::diverged;
    return out;
  }

  long iter = 0;
  while (iter < config.max_iterations) {
    ++iter;
    grad_beta.setZero();
    grad_alpha.setZero();
    sample_batch(order, b, rng);
    for (int j = 0; j < b; ++j) {
      const int i = order[static_cast<std::size_t>(j)];
      const int x0 = xr.start[static_cast<std::size_t>(i)];
      const int x1 = xr.start[static_cast<std::size_t>(i) + 1];
      const int z0 = zr.start[static_cast<std::size_t>(i)];
      const int z1 = zr.start[static_cast<std::size_t>(i) + 1];
      xi.resize(static_cast<std::size_t>(x1 - x0));
      zeta.resize(static_cast<std::size_t>(z1 - z0));

      double em = 0.0;
      for (int p = x0; p < x1; ++p) {
        const double m = draw_multiplier(noise.kind, noise.mean_param, rng);
        xi[static_cast<std::size_t>(p - x0)] = m;
        em += xr.val[static_cast<std::size_t>(p)] * m * out.beta(xr.col[static_cast<std::size_t>(p)]);
      }
      double eg = 0.0;
      for (int p = z0; p < z1; ++p) {
        const double m = draw_multiplier(noise.kind, noise.disp_param, rng);
        zeta[static_cast<std::size_t>(p - z0)] = m;
        eg += zr.val[static_cast<std::size_t>(p)] * m * out.alpha(zr.col[static_cast<std::size_t>(p)]);
      }
      em = clamp_finite(em, eta_lo, eta_hi);
      eg = clamp_finite(eg, -disp_bound, disp_bound);

      const double s = scale(i);
      const double gamma = std::exp(eg);
      const double r_beta = gamma / s * (y(i) - k.b1(em));
      const double r_alpha = 0.5 + gamma / s * (y(i) * em - k.b(em) - saturated(i));
      // Gradient of the negative log-likelihood at the perturbed features.
      for (int p = x0; p < x1; ++p) {
        grad_beta(xr.col[static_cast<std::size_t>(p)]) -=
            xr.val[static_cast<std::size_t>(p)] * xi[static_cast<std::size_t>(p - x0)] * r_beta;
      }
      for (int p = z0; p < z1; ++p) {
        grad_alpha(zr.col[static_cast<std::size_t>(p)]) -=
            zr.val[static_cast<std::size_t>(p)] * zeta[static_cast<std::size_t>(p - z0)] * r_alpha;
      }
    }
    grad_beta *= batch_scale;
    grad_alpha *= batch_scale;

    if (!grad_beta.allFinite() || !grad_alpha.allFinite()) {
      ++out.rejected_steps;
      if (out.rejected_steps == 1 || out.rejected_steps % 1000 == 0) {
        spdlog::debug("fit: rejected non-finite step at iteration {} ({} so far)", iter,
                      out.rejected_steps);
      }
    } else {
      update_block(out.beta, beta_state, grad_beta, penalty ? &penalty->mean : nullptr,
                   penalty ? penalty->lambda_mean : 0.0, beta_solver.get(), config);
      if (config.update_alpha) {
        update_block(out.alpha, alpha_state, grad_alpha, penalty ? &penalty->disp : nullptr,
                     penalty ? penalty->lambda_disp : 0.0, alpha_solver.get(), config);
      }
    }

    if (iter % config.trace_every == 0 || iter == config.max_iterations) {
      const double obj = record(iter);
      if (!std::isfinite(obj) || !out.beta.allFinite() || !out.alpha.allFinite()) {
        out.diverged = true;
        out.termination = Termination::diverged;
        out.iterations = iter;
        return out;
      }
      if (iter % config.trace_every == 0 && windows_converged()) {
        out.termination = Termination::stationary;
        out.iterations = iter;
        return out;
      }
    }
  }
  out.iterations = iter;
  out.termination = Termination::max_iterations;
  return out;
}

}  // namespace defglm
