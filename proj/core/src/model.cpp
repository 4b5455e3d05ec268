#include "defglm/model.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "defglm/errors.hpp"

namespace defglm {

void GlmSpec::validate() const {
  const Eigen::Index n = X.rows();
  if (Z.rows() != n) {
    throw ConfigError("mean and dispersion designs have different row counts");
  }
  if (beta.size() != X.cols()) {
    throw ConfigError("beta has length " + std::to_string(beta.size()) + ", X has " +
                      std::to_string(X.cols()) + " columns");
  }
  if (alpha.size() != Z.cols()) {
    throw ConfigError("alpha has length " + std::to_string(alpha.size()) + ", Z has " +
                      std::to_string(Z.cols()) + " columns");
  }
  if (!(phi > 0.0)) throw ConfigError("scale phi must be positive");
  if (nu.size() != 0) {
    if (nu.size() != n) throw ConfigError("weight vector nu must have one entry per row");
    if (!(nu.array() > 0.0).all()) throw ConfigError("weights nu must be positive");
  }
}

void GlmSpec::validate(const Eigen::VectorXd& y) const {
  validate();
  if (y.size() != X.rows()) {
    throw ConfigError("response has " + std::to_string(y.size()) + " entries, design has " +
                      std::to_string(X.rows()) + " rows");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!kernel.in_support(y(i))) {
      std::ostringstream msg;
      msg << "response y[" << i << "]=" << y(i) << " outside the " << kernel.name() << " support";
      throw DomainError(msg.str());
    }
  }
}

double observation_loglik(const FamilyKernel& kernel, double eta_mean, double eta_disp, double y,
                          double scale) {
  const double gamma = std::exp(eta_disp);
  return 0.5 * eta_disp + gamma * (y * eta_mean - kernel.b(eta_mean)) / scale +
         (1.0 - gamma) * kernel.saturated_term(y) / scale;
}

double loglik(const GlmSpec& spec, const Eigen::VectorXd& y) {
  spec.validate(y);
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    total += observation_loglik(spec.kernel, eta_m(i), eta_g(i), y(i), spec.scale(i));
  }
  return total;
}

double loglik_with_base(const GlmSpec& spec, const Eigen::VectorXd& y, std::span<const int> rows) {
  spec.validate(y);
  auto term = [&](Eigen::Index i) {
    const double s = spec.scale(i);
    const double em = spec.X.row(i).dot(spec.beta);
    const double eg = spec.Z.row(i).dot(spec.alpha);
    return observation_loglik(spec.kernel, em, eg, y(i), s) +
           spec.kernel.log_base_measure(y(i), s);
  };
  double total = 0.0;
  if (rows.empty()) {
    for (Eigen::Index i = 0; i < y.size(); ++i) total += term(i);
  } else {
    for (int i : rows) total += term(i);
  }
  return total;
}

ScoreReport score(const GlmSpec& spec, const Eigen::VectorXd& y) {
  spec.validate(y);
  const Eigen::Index n = y.size();
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  const auto& k = spec.kernel;

  // Per-row scalar factors; every block is X' diag(.) X, X' diag(.) Z or Z' diag(.) Z.
  Eigen::VectorXd resid(n), disp_factor(n), w_beta(n), w_alpha(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = spec.scale(i);
    const double gamma = std::exp(eta_g(i));
    const double dev_part = y(i) * eta_m(i) - k.b(eta_m(i)) - k.saturated_term(y(i));
    resid(i) = gamma / s * (y(i) - k.b1(eta_m(i)));
    disp_factor(i) = gamma / s * dev_part;
    w_beta(i) = gamma * k.b2(eta_m(i)) / s;
    w_alpha(i) = -disp_factor(i);
  }

  ScoreReport out;
  out.score_beta = spec.X.transpose() * resid;
  out.score_alpha = spec.Z.transpose() * (Eigen::VectorXd::Constant(n, 0.5) + disp_factor);
  out.hess_beta_beta = -(spec.X.transpose() * w_beta.asDiagonal() * spec.X);
  out.hess_beta_alpha = spec.X.transpose() * resid.asDiagonal() * spec.Z;
  out.hess_alpha_alpha = spec.Z.transpose() * disp_factor.asDiagonal() * spec.Z;
  out.w_beta = std::move(w_beta);
  out.w_alpha = std::move(w_alpha);
  return out;
}

FisherBlocks fisher_blocks(const GlmSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.rows();
  if (n == 0) throw ConfigError("Fisher information needs at least one row");
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  const Eigen::VectorXd eta_g = spec.Z * spec.alpha;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = std::exp(eta_g(i)) * spec.kernel.b2(eta_m(i)) / spec.scale(i);
  }
  FisherBlocks out;
  out.beta = spec.X.transpose() * w.asDiagonal() * spec.X / static_cast<double>(n);
  out.alpha = spec.Z.transpose() * spec.Z / static_cast<double>(n);
  return out;
}

Eigen::VectorXd unit_deviances(const GlmSpec& spec, const Eigen::VectorXd& y) {
  spec.validate(y);
  const Eigen::VectorXd eta_m = spec.X * spec.beta;
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = spec.kernel.saturated_term(y(i));
    out(i) = 2.0 * (t - y(i) * eta_m(i) + spec.kernel.b(eta_m(i))) / spec.scale(i);
  }
  return out;
}

}  // namespace defglm
