#include "defglm/dropout.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "defglm/errors.hpp"

namespace defglm {

namespace {

// Welford accumulator for mean and standard error of the mean.
class RunningMean {
 public:
  void add(double v) {
    ++count_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(count_);
    m2_ += d * (v - mean_);
  }
  McEstimate estimate() const {
    McEstimate out;
    out.value = mean_;
    out.draws = count_;
    out.std_error =
        count_ > 1 ? std::sqrt(m2_ / static_cast<double>(count_ - 1) / static_cast<double>(count_))
                   : 0.0;
    return out;
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double side_variance(NoiseKind kind, double param) {
  switch (kind) {
    case NoiseKind::none:
      return 0.0;
    case NoiseKind::bernoulli:
      return param / (1.0 - param);
    case NoiseKind::gaussian:
      return param * param;
  }
  return 0.0;
}

// x~'coef for one row under feature-level noise. Entries with x_j coef_j = 0
// draw nothing: their multiplier cannot affect the product.
template <typename Row>
double perturbed_predictor(const Row& row, const Eigen::VectorXd& coef, NoiseKind kind,
                           double param, Rng& rng) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    const double t = row(j) * coef(j);
    if (t == 0.0) continue;
    acc += t * draw_multiplier(kind, param, rng);
  }
  return acc;
}

// Draws x~'coef. Gaussian noise uses the exact marginal N(x'coef, sigma^2 ||x . coef||^2).
template <typename Row>
double draw_predictor(const Row& row, const Eigen::VectorXd& coef, double eta, double sq_norm,
                      NoiseKind kind, double param, Rng& rng) {
  switch (kind) {
    case NoiseKind::none:
      return eta;
    case NoiseKind::gaussian:
      if (param == 0.0) return eta;
      return eta + param * std::sqrt(sq_norm) * standard_normal(rng);
    case NoiseKind::bernoulli:
      if (param == 0.0) return eta;
      return perturbed_predictor(row, coef, kind, param, rng);
  }
  return eta;
}

Eigen::VectorXd row_sq_norms(const Eigen::MatrixXd& M, const Eigen::VectorXd& coef) {
  return (M.array().square().matrix() * coef.array().square().matrix());
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none:
      return "none";
    case NoiseKind::bernoulli:
      return "bernoulli";
    case NoiseKind::gaussian:
      return "gaussian";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "none") return NoiseKind::none;
  if (name == "bernoulli") return NoiseKind::bernoulli;
  if (name == "gaussian") return NoiseKind::gaussian;
  throw ConfigError("unknown noise kind '" + std::string(name) + "'");
}

double NoiseSpec::variance_mean() const { return side_variance(kind, mean_param); }
double NoiseSpec::variance_disp() const { return side_variance(kind, disp_param); }

void NoiseSpec::validate() const {
  if (kind == NoiseKind::bernoulli) {
    for (double d : {mean_param, disp_param}) {
      if (!(d >= 0.0 && d < 1.0)) {
        throw ConfigError("Bernoulli dropout probability must lie in [0, 1), got " +
                          std::to_string(d));
      }
    }
  } else if (kind == NoiseKind::gaussian) {
    for (double s : {mean_param, disp_param}) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw ConfigError("Gaussian dropout standard deviation must be >= 0, got " +
                          std::to_string(s));
      }
    }
  }
}

double draw_multiplier(NoiseKind kind, double param, Rng& rng) {
  switch (kind) {
    case NoiseKind::none:
      return 1.0;
    case NoiseKind::bernoulli: {
      const double keep = 1.0 - param;
      return uniform01(rng) < keep ? 1.0 / keep : 0.0;
    }
    case NoiseKind::gaussian:
      return 1.0 + param * standard_normal(rng);
  }
  return 1.0;
}

Eigen::VectorXd perturb(const Eigen::VectorXd& features, const Eigen::VectorXd& noise) {
  if (features.size() != noise.size()) {
    throw ConfigError("feature and noise vectors differ in length");
  }
  return features.cwiseProduct(noise);
}

McEstimate mc_dropout_objective(const GlmSpec& spec, const Eigen::VectorXd& y,
                                const NoiseSpec& noise, std::size_t draws, Rng& rng) {
  spec.validate(y);
  noise.validate();
  if (draws < 1) throw ConfigError("MC objective needs at least one draw");
  if (noise.kind == NoiseKind::none) {
    return McEstimate{-loglik(spec, y), 0.0, draws};
  }
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  const Eigen::VectorXd sq_m = row_sq_norms(spec.X, spec.beta);
  const Eigen::VectorXd sq_g = row_sq_norms(spec.Z, spec.alpha);
  const Eigen::Index n = y.size();

  RunningMean acc;
  for (std::size_t r = 0; r < draws; ++r) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double em = draw_predictor(spec.X.row(i), spec.beta, eta_m(i), sq_m(i), noise.kind,
                                       noise.mean_param, rng);
      const double eg = draw_predictor(spec.Z.row(i), spec.alpha, eta_g(i), sq_g(i), noise.kind,
                                       noise.disp_param, rng);
      total -= observation_loglik(spec.kernel, em, eg, y(i), spec.scale(i));
    }
    acc.add(total);
  }
  return acc.estimate();
}

std::vector<McEstimate> exact_penalty_gap(const GlmSpec& spec, const NoiseSpec& noise,
                                          std::size_t draws, Rng& rng) {
  spec.validate();
  noise.validate();
  if (noise.variance_disp() != 0.0) {
    throw ConfigError("exact_penalty_gap takes mean-side noise only");
  }
  if (draws < 1) throw ConfigError("penalty gap needs at least one draw");
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  const Eigen::VectorXd sq_m = row_sq_norms(spec.X, spec.beta);
  std::vector<McEstimate> out;
  out.reserve(static_cast<std::size_t>(spec.rows()));
  for (Eigen::Index i = 0; i < spec.rows(); ++i) {
    const double factor = std::exp(eta_g(i)) / spec.scale(i);
    const double b0 = spec.kernel.b(eta_m(i));
    RunningMean acc;
    for (std::size_t r = 0; r < draws; ++r) {
      const double em = draw_predictor(spec.X.row(i), spec.beta, eta_m(i), sq_m(i), noise.kind,
                                       noise.mean_param, rng);
      acc.add(factor * (spec.kernel.b(em) - b0));
    }
    out.push_back(acc.estimate());
  }
  return out;
}

PenaltySnapshot penalty_matrices(const GlmSpec& spec, const NoiseSpec& noise) {
  spec.validate();
  noise.validate();
  const Eigen::Index n = spec.rows();
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  const Eigen::VectorXd sq_g = row_sq_norms(spec.Z, spec.alpha);
  const double s2g = noise.variance_disp();

  PenaltySnapshot out;
  out.W.resize(n);
  out.Lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.W(i) = std::exp(eta_g(i)) * spec.kernel.b2(eta_m(i)) / spec.scale(i);
    out.Lambda(i) = std::exp(0.5 * s2g * sq_g(i));
  }
  out.W_tilde = out.Lambda.cwiseProduct(out.W);
  const Eigen::MatrixXd X2 = spec.X.array().square().matrix();
  out.Theta = (X2.transpose() * out.W).cwiseSqrt();
  out.Theta_tilde = (X2.transpose() * out.W_tilde).cwiseSqrt();
  out.Gamma = spec.Z.array().square().colwise().sum().sqrt().transpose().matrix();

  for (Eigen::Index j = 0; j < spec.X.cols(); ++j) {
    if ((spec.X.col(j).array() == 0.0).all()) out.degenerate_mean_columns.push_back(int(j));
  }
  for (Eigen::Index j = 0; j < spec.Z.cols(); ++j) {
    if ((spec.Z.col(j).array() == 0.0).all()) out.degenerate_disp_columns.push_back(int(j));
  }
  if (!out.degenerate_mean_columns.empty() || !out.degenerate_disp_columns.empty()) {
    spdlog::warn("penalty_matrices: {} mean and {} dispersion columns are identically zero; "
                 "their coefficients are left unpenalised",
                 out.degenerate_mean_columns.size(), out.degenerate_disp_columns.size());
  }
  return out;
}

double expected_dispersion(const Eigen::VectorXd& z, const Eigen::VectorXd& alpha,
                           double variance_disp) {
  if (z.size() != alpha.size()) throw ConfigError("z and alpha differ in length");
  const double sq = z.cwiseProduct(alpha).squaredNorm();
  return std::exp(z.dot(alpha) + 0.5 * variance_disp * sq);
}

McEstimate mc_expected_dispersion(const Eigen::VectorXd& z, const Eigen::VectorXd& alpha,
                                  NoiseKind kind, double disp_param, std::size_t draws, Rng& rng) {
  if (z.size() != alpha.size()) throw ConfigError("z and alpha differ in length");
  NoiseSpec{kind, 0.0, disp_param}.validate();
  const double eta = z.dot(alpha);
  const double sq = z.cwiseProduct(alpha).squaredNorm();
  RunningMean acc;
  for (std::size_t r = 0; r < draws; ++r) {
    acc.add(std::exp(draw_predictor(z, alpha, eta, sq, kind, disp_param, rng)));
  }
  return acc.estimate();
}

ObjectiveGradient penalized_objective_gradient(const GlmSpec& spec, const Eigen::VectorXd& y,
                                               const NoiseSpec& noise) {
  spec.validate(y);
  noise.validate();
  const auto& k = spec.kernel;
  const double s2m = noise.variance_mean();
  const double s2g = noise.variance_disp();
  const Eigen::Index n = y.size();
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  const Eigen::VectorXd sq_m = row_sq_norms(spec.X, spec.beta);
  const Eigen::VectorXd sq_g = row_sq_norms(spec.Z, spec.alpha);
  // d/d alpha of log E[gamma~_i] is u_i = z_i + s2g * z_i^2 . alpha
  const Eigen::MatrixXd Z2 = spec.Z.array().square().matrix();

  ObjectiveGradient out;
  out.grad_beta = Eigen::VectorXd::Zero(spec.X.cols());
  out.grad_alpha = Eigen::VectorXd::Zero(spec.Z.cols());
  double value = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = spec.scale(i);
    const double log_g = eta_g(i) + 0.5 * s2g * sq_g(i);
    const double g = std::exp(log_g);
    const double b0 = k.b(eta_m(i));
    const double t = k.saturated_term(y(i));
    const double fit_part = y(i) * eta_m(i) - b0;
    const double lt = 0.5 * log_g + g * fit_part / s + (1.0 - g) * t / s;
    const double w = g * k.b2(eta_m(i)) / s;
    value += -lt + 0.5 * s2m * w * sq_m(i);

    const auto x = spec.X.row(i).transpose();
    const Eigen::VectorXd u =
        spec.Z.row(i).transpose() + s2g * Z2.row(i).transpose().cwiseProduct(spec.alpha);
    // likelihood part
    out.grad_beta -= (g * (y(i) - k.b1(eta_m(i))) / s) * x;
    out.grad_alpha -= (0.5 + g * (fit_part - t) / s) * u;
    // mean penalty 1/2 s2m * W~_ii ||x_i . beta||^2
    if (s2m != 0.0) {
      out.grad_beta += 0.5 * s2m * (g * k.b3(eta_m(i)) / s * sq_m(i)) * x;
      out.grad_beta += s2m * w * x.cwiseProduct(x).cwiseProduct(spec.beta);
      out.grad_alpha += (0.5 * s2m * w * sq_m(i)) * u;
    }
  }
  if (s2g != 0.0) {
    const Eigen::VectorXd gamma_diag2 = Z2.colwise().sum().transpose();
    value += 0.25 * s2g * gamma_diag2.dot(spec.alpha.array().square().matrix());
    out.grad_alpha += 0.5 * s2g * gamma_diag2.cwiseProduct(spec.alpha);
  }
  out.value = value;
  return out;
}

double penalized_objective(const GlmSpec& spec, const Eigen::VectorXd& y, const NoiseSpec& noise) {
  return penalized_objective_gradient(spec, y, noise).value;
}

namespace {

double noise_spread(const Eigen::VectorXd& x, const Eigen::VectorXd& beta, double sigma) {
  if (x.size() != beta.size()) throw ConfigError("x and beta differ in length");
  return sigma * sigma * x.cwiseProduct(beta).squaredNorm();
}

}  // namespace

double remainder_poisson(const Eigen::VectorXd& x, const Eigen::VectorXd& beta, double sigma) {
  const double v = noise_spread(x, beta, sigma);
  const double v2 = v * v;
  return std::exp(x.dot(beta)) * (std::expm1(0.5 * v2) - 0.5 * v2);
}

double remainder_poisson_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                               double sigma) {
  const double v = noise_spread(x, beta, sigma);
  return std::exp(x.dot(beta)) * (std::expm1(0.5 * v) - 0.5 * v);
}

double remainder_binomial_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                                double sigma) {
  const double v = noise_spread(x, beta, sigma);
  const double v2 = v * v;
  return std::expm1(0.5 * v2) - 0.5 * v2;
}

double remainder_binomial_bound_scaled(const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                                       double sigma, int trials) {
  const double v = noise_spread(x, beta, sigma);
  return trials * (std::expm1(0.5 * v) - 0.5 * v);
}

McEstimate mc_taylor_remainder(const FamilyKernel& kernel, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& beta, NoiseKind kind, double mean_param,
                               std::size_t draws, Rng& rng) {
  if (x.size() != beta.size()) throw ConfigError("x and beta differ in length");
  NoiseSpec{kind, mean_param, 0.0}.validate();
  const double eta = x.dot(beta);
  const double sq = x.cwiseProduct(beta).squaredNorm();
  const double b0 = kernel.b(eta);
  const double b1 = kernel.b1(eta);
  const double b2 = kernel.b2(eta);
  RunningMean acc;
  for (std::size_t r = 0; r < draws; ++r) {
    const double d = draw_predictor(x, beta, eta, sq, kind, mean_param, rng) - eta;
    acc.add(kernel.b(eta + d) - b0 - b1 * d - 0.5 * b2 * d * d);
  }
  return acc.estimate();
}

}  // namespace defglm
