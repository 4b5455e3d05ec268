#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "defglm/rng.hpp"

namespace defglm {

enum class Family { gaussian, poisson, binomial };

std::string_view to_string(Family family);
/// Accepts "gaussian", "poisson"/"dpoisson", "binomial"/"dbinomial".
Family family_from_string(std::string_view name);

/// Building blocks of a one-parameter natural exponential family:
/// partition function b, its derivatives, the inverse mean map, the
/// saturated term y*theta(y) - b(theta(y)) and the base measure c(y, phi/nu).
///
/// Binomial kernels carry the number of trials inside b:
/// b(theta) = N log(1 + exp(theta)), so the mean is on the count scale 0..N.
class FamilyKernel {
 public:
  static FamilyKernel gaussian();
  static FamilyKernel poisson();
  static FamilyKernel binomial(int trials);

  Family family() const { return family_; }
  int trials() const { return trials_; }
  std::string_view name() const { return to_string(family_); }

  double b(double theta) const;
  double b1(double theta) const;  ///< mean map b'
  double b2(double theta) const;  ///< variance map b''
  double b3(double theta) const;

  /// (b')^{-1}; throws DomainError when mu is outside the open mean domain.
  double mean_to_theta(double mu) const;

  /// y*theta(y) - b(theta(y)), evaluated by its limit on the support boundary
  /// (0 log 0 := 0). This is the sup over theta of y*theta - b(theta).
  double saturated_term(double y) const;

  /// c(y, phi/nu). For Gaussian this includes the -y^2/(2 s) and
  /// normalising terms; discrete families ignore the scale.
  double log_base_measure(double y, double scale) const;

  bool in_support(double y) const;
  bool is_discrete() const { return family_ != Family::gaussian; }

  /// Range used to keep x'beta finite during fitting.
  double min_linear_predictor() const;
  double max_linear_predictor() const;

 private:
  FamilyKernel(Family family, int trials) : family_(family), trials_(trials) {}

  Family family_;
  int trials_;
};

/// Per-observation DEF parameters.
struct DefParams {
  double theta = 0.0;
  double gamma = 1.0;
  double phi = 1.0;
  double nu = 1.0;

  double scale() const { return phi / nu; }
};

struct DefNormalization {
  double constant = 1.0;      ///< C(gamma, theta)
  int truncation_bound = -1;  ///< largest support point summed; -1 for closed form
  double tail_mass = 0.0;     ///< bound on the normalised mass beyond truncation_bound
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// log f_{gamma,theta}(y). With `normalized` off the constant C is taken as 1,
/// the convention used for fitting.
double def_log_density(const FamilyKernel& kernel, const DefParams& params, double y,
                       bool normalized = false);

DefNormalization def_normalizer(const FamilyKernel& kernel, const DefParams& params,
                                double tail_tol = 1e-12);

/// Exactly normalised pmf over a truncated discrete support {0..bound}.
class DefPmf {
 public:
  DefPmf(const FamilyKernel& kernel, const DefParams& params, double tail_tol = 1e-12);

  const std::vector<double>& probabilities() const { return pmf_; }
  const DefNormalization& normalization() const { return norm_; }
  Moments moments() const;
  /// Inverse CDF at u in [0, 1).
  int quantile(double u) const;

 private:
  std::vector<double> pmf_;
  std::vector<double> cdf_;
  DefNormalization norm_;
};

Moments def_moments(const FamilyKernel& kernel, const DefParams& params, double tail_tol = 1e-12);

/// i.i.d. draws: closed-form normal N(theta, phi/(nu*gamma)) for the Gaussian
/// kernel, inverse CDF over the exactly normalised truncated pmf otherwise.
std::vector<double> def_sample(const FamilyKernel& kernel, const DefParams& params, Rng& rng,
                               std::size_t count, double tail_tol = 1e-12);

}  // namespace defglm
