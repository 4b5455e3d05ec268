#include "defglm/families.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "defglm/errors.hpp"

namespace defglm {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

bool is_integral(double y) { return std::isfinite(y) && std::floor(y) == y; }

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_params(const DefParams& params) {
  if (!(params.gamma > 0.0) || !std::isfinite(params.gamma)) {
    std::ostringstream msg;
    msg << "dispersion gamma must be positive and finite, got " << params.gamma;
    throw DomainError(msg.str());
  }
  if (!(params.scale() > 0.0) || !std::isfinite(params.scale())) {
    throw DomainError("phi/nu must be positive and finite");
  }
  if (!std::isfinite(params.theta)) {
    throw DomainError("natural parameter theta must be finite");
  }
}

// Unnormalised log pmf of the discrete DEF on {0..bound}. The returned vector
// covers the truncated support; `tail` receives a bound on the unnormalised
// mass beyond it, relative to the total.
std::vector<double> discrete_log_terms(const FamilyKernel& kernel, const DefParams& params,
                                       double tail_tol, double* relative_tail) {
  check_params(params);
  std::vector<double> terms;
  if (kernel.family() == Family::binomial) {
    terms.reserve(static_cast<std::size_t>(kernel.trials()) + 1);
    for (int y = 0; y <= kernel.trials(); ++y) {
      terms.push_back(def_log_density(kernel, params, y, false));
    }
    *relative_tail = 0.0;
    return terms;
  }

  const double mean = std::exp(params.theta);
  const double cap = std::max(10.0 * mean + 100.0, 200.0);
  const double log_tol = std::log(tail_tol);
  double log_sum = -std::numeric_limits<double>::infinity();
  for (int y = 0;; ++y) {
    if (y > cap) {
      std::ostringstream msg;
      msg << "double Poisson truncation did not converge: tail above " << tail_tol
          << " at cap " << cap << " (theta=" << params.theta << ", gamma=" << params.gamma << ")";
      throw NumericError(msg.str());
    }
    const double lt = def_log_density(kernel, params, y, false);
    terms.push_back(lt);
    log_sum = log_add_exp(log_sum, lt);
    if (y < 2 || y <= mean) continue;
    const double log_ratio = lt - terms[terms.size() - 2];
    if (log_ratio >= 0.0) continue;
    // Past the mode the term ratio keeps shrinking, so the remaining tail is
    // dominated by a geometric series with the current ratio.
    const double r = std::exp(log_ratio);
    const double log_tail = lt + std::log(r) - std::log1p(-r);
    if (log_tail - log_sum < log_tol) {
      *relative_tail = std::exp(log_tail - log_sum);
      return terms;
    }
  }
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::gaussian:
      return "gaussian";
    case Family::poisson:
      return "poisson";
    case Family::binomial:
      return "binomial";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  if (name == "gaussian" || name == "normal") return Family::gaussian;
  if (name == "poisson" || name == "dpoisson") return Family::poisson;
  if (name == "binomial" || name == "dbinomial") return Family::binomial;
  throw ConfigError("unknown family '" + std::string(name) +
                    "' (expected gaussian, dpoisson or dbinomial)");
}

FamilyKernel FamilyKernel::gaussian() { return FamilyKernel(Family::gaussian, 0); }
FamilyKernel FamilyKernel::poisson() { return FamilyKernel(Family::poisson, 0); }
FamilyKernel FamilyKernel::binomial(int trials) {
  if (trials < 1) throw ConfigError("binomial kernel needs at least one trial");
  return FamilyKernel(Family::binomial, trials);
}

double FamilyKernel::b(double theta) const {
  switch (family_) {
    case Family::gaussian:
      return 0.5 * theta * theta;
    case Family::poisson:
      return std::exp(theta);
    case Family::binomial:
      // log(1 + e^t) without overflow
      return trials_ * (std::max(theta, 0.0) + std::log1p(std::exp(-std::abs(theta))));
  }
  return 0.0;
}

double FamilyKernel::b1(double theta) const {
  switch (family_) {
    case Family::gaussian:
      return theta;
    case Family::poisson:
      return std::exp(theta);
    case Family::binomial:
      return trials_ * sigmoid(theta);
  }
  return 0.0;
}

double FamilyKernel::b2(double theta) const {
  switch (family_) {
    case Family::gaussian:
      return 1.0;
    case Family::poisson:
      return std::exp(theta);
    case Family::binomial: {
      const double p = sigmoid(theta);
      return trials_ * p * (1.0 - p);
    }
  }
  return 0.0;
}

double FamilyKernel::b3(double theta) const {
  switch (family_) {
    case Family::gaussian:
      return 0.0;
    case Family::poisson:
      return std::exp(theta);
    case Family::binomial: {
      const double p = sigmoid(theta);
      return trials_ * p * (1.0 - p) * (1.0 - 2.0 * p);
    }
  }
  return 0.0;
}

double FamilyKernel::mean_to_theta(double mu) const {
  switch (family_) {
    case Family::gaussian:
      if (!std::isfinite(mu)) throw DomainError("Gaussian mean must be finite");
      return mu;
    case Family::poisson:
      if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw DomainError("Poisson mean must be positive, got " + std::to_string(mu));
      }
      return std::log(mu);
    case Family::binomial:
      if (!(mu > 0.0 && mu < trials_)) {
        throw DomainError("binomial mean must lie in (0, " + std::to_string(trials_) + "), got " +
                          std::to_string(mu));
      }
      return std::log(mu / (trials_ - mu));
  }
  return 0.0;
}

double FamilyKernel::saturated_term(double y) const {
  switch (family_) {
    case Family::gaussian:
      return 0.5 * y * y;
    case Family::poisson:
      return xlogx(y) - y;
    case Family::binomial:
      return xlogx(y) + xlogx(trials_ - y) - xlogx(trials_);
  }
  return 0.0;
}

double FamilyKernel::log_base_measure(double y, double scale) const {
  switch (family_) {
    case Family::gaussian:
      return -0.5 * y * y / scale - 0.5 * std::log(2.0 * std::numbers::pi * scale);
    case Family::poisson:
      return -std::lgamma(y + 1.0);
    case Family::binomial:
      return std::lgamma(trials_ + 1.0) - std::lgamma(y + 1.0) - std::lgamma(trials_ - y + 1.0);
  }
  return 0.0;
}

bool FamilyKernel::in_support(double y) const {
  switch (family_) {
    case Family::gaussian:
      return std::isfinite(y);
    case Family::poisson:
      return is_integral(y) && y >= 0.0;
    case Family::binomial:
      return is_integral(y) && y >= 0.0 && y <= trials_;
  }
  return false;
}

double FamilyKernel::min_linear_predictor() const {
  switch (family_) {
    case Family::gaussian:
      return -1e8;
    case Family::poisson:
      return -30.0;
    case Family::binomial:
      return -30.0;
  }
  return 0.0;
}

double FamilyKernel::max_linear_predictor() const {
  switch (family_) {
    case Family::gaussian:
      return 1e8;
    case Family::poisson:
      return 20.0;
    case Family::binomial:
      return 30.0;
  }
  return 0.0;
}

double def_log_density(const FamilyKernel& kernel, const DefParams& params, double y,
                       bool normalized) {
  check_params(params);
  if (!kernel.in_support(y)) {
    std::ostringstream msg;
    msg << "response " << y << " outside the support of the " << kernel.name() << " kernel";
    throw DomainError(msg.str());
  }
  const double s = params.scale();
  const double g = params.gamma;
  double value = 0.5 * std::log(g) + g * (y * params.theta - kernel.b(params.theta)) / s +
                 (1.0 - g) * kernel.saturated_term(y) / s + kernel.log_base_measure(y, s);
  if (normalized) {
    value += std::log(def_normalizer(kernel, params).constant);
  }
  return value;
}

DefNormalization def_normalizer(const FamilyKernel& kernel, const DefParams& params,
                                double tail_tol) {
  check_params(params);
  if (kernel.family() == Family::gaussian) {
    // gamma * (y - theta)^2 / (2s) plus the base measure is exactly the
    // N(theta, s/gamma) kernel, so C = 1.
    return DefNormalization{1.0, -1, 0.0};
  }
  double tail = 0.0;
  const std::vector<double> terms = discrete_log_terms(kernel, params, tail_tol, &tail);
  const double shift = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - shift);
  DefNormalization out;
  out.constant = std::exp(-shift) / sum;
  out.truncation_bound = static_cast<int>(terms.size()) - 1;
  out.tail_mass = tail;
  return out;
}

DefPmf::DefPmf(const FamilyKernel& kernel, const DefParams& params, double tail_tol) {
  if (!kernel.is_discrete()) {
    throw DomainError("DefPmf requires a discrete kernel");
  }
  double tail = 0.0;
  const std::vector<double> terms = discrete_log_terms(kernel, params, tail_tol, &tail);
  const double shift = *std::max_element(terms.begin(), terms.end());
  pmf_.resize(terms.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    pmf_[i] = std::exp(terms[i] - shift);
    sum += pmf_[i];
  }
  cdf_.resize(pmf_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf_.size(); ++i) {
    pmf_[i] /= sum;
    acc += pmf_[i];
    cdf_[i] = acc;
  }
  norm_.constant = std::exp(-shift) / sum;
  norm_.truncation_bound = static_cast<int>(pmf_.size()) - 1;
  norm_.tail_mass = tail;
}

Moments DefPmf::moments() const {
  double mean = 0.0;
  for (std::size_t y = 0; y < pmf_.size(); ++y) mean += static_cast<double>(y) * pmf_[y];
  double var = 0.0;
  for (std::size_t y = 0; y < pmf_.size(); ++y) {
    const double d = static_cast<double>(y) - mean;
    var += d * d * pmf_[y];
  }
  return Moments{mean, var};
}

int DefPmf::quantile(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return static_cast<int>(cdf_.size()) - 1;
  return static_cast<int>(it - cdf_.begin());
}

Moments def_moments(const FamilyKernel& kernel, const DefParams& params, double tail_tol) {
  check_params(params);
  if (kernel.family() == Family::gaussian) {
    return Moments{params.theta, params.scale() / params.gamma};
  }
  return DefPmf(kernel, params, tail_tol).moments();
}

std::vector<double> def_sample(const FamilyKernel& kernel, const DefParams& params, Rng& rng,
                               std::size_t count, double tail_tol) {
  check_params(params);
  std::vector<double> out;
  out.reserve(count);
  if (kernel.family() == Family::gaussian) {
    const double sd = std::sqrt(params.scale() / params.gamma);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(params.theta + sd * standard_normal(rng));
    }
    return out;
  }
  const DefPmf pmf(kernel, params, tail_tol);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(pmf.quantile(uniform01(rng)));
  }
  return out;
}

}  // namespace defglm
