#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "defglm/errors.hpp"
#include "defglm/families.hpp"
#include "support.hpp"

using namespace defglm;
using namespace defglm::testing;

namespace {

// Independent pmfs from the textbook formulas.
double poisson_logpmf(double y, double mu) { return y * std::log(mu) - mu - std::lgamma(y + 1.0); }

double binomial_logpmf(double y, int n, double p) {
  return std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0) +
         (y > 0 ? y * std::log(p) : 0.0) + (y < n ? (n - y) * std::log1p(-p) : 0.0);
}

double normal_logpdf(double y, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (y - mean) * (y - mean) / var;
}

// Unnormalised DEF pmf summed far past any truncation the library uses.
double brute_force_constant(const FamilyKernel& k, const DefParams& p, int upper) {
  double sum = 0.0;
  for (int y = 0; y <= upper; ++y) sum += std::exp(def_log_density(k, p, y, false));
  return 1.0 / sum;
}

}  // namespace

TEST(FamilyKernel, DerivativesMatchFiniteDifferences) {
  Rng rng = make_stream(11, {1});
  for (auto k : {FamilyKernel::gaussian(), FamilyKernel::poisson(), FamilyKernel::binomial(7)}) {
    for (int r = 0; r < 20; ++r) {
      const double t = uniform(rng, -3.0, 3.0);
      const double h = 1e-5;
      EXPECT_LT(rel_err((k.b(t + h) - k.b(t - h)) / (2 * h), k.b1(t), 1e-3), 1e-6) << k.name();
      EXPECT_LT(rel_err((k.b1(t + h) - k.b1(t - h)) / (2 * h), k.b2(t), 1e-3), 1e-6) << k.name();
      EXPECT_LT(rel_err((k.b2(t + h) - k.b2(t - h)) / (2 * h), k.b3(t), 1e-3), 1e-6) << k.name();
    }
  }
}

TEST(FamilyKernel, ConvexAndMeanMapInvertible) {
  Rng rng = make_stream(11, {2});
  for (auto k : {FamilyKernel::gaussian(), FamilyKernel::poisson(), FamilyKernel::binomial(70)}) {
    for (int r = 0; r < 50; ++r) {
      const double t = uniform(rng, -5.0, 5.0);
      EXPECT_GT(k.b2(t), 0.0);
      EXPECT_NEAR(k.mean_to_theta(k.b1(t)), t, 1e-9);
    }
  }
}

TEST(FamilyKernel, PartitionFunctionsHaveTheStandardForms) {
  const auto g = FamilyKernel::gaussian();
  const auto p = FamilyKernel::poisson();
  const auto b = FamilyKernel::binomial(70);
  for (double t : {-2.0, -0.3, 0.0, 1.7}) {
    EXPECT_DOUBLE_EQ(g.b(t), 0.5 * t * t);
    EXPECT_DOUBLE_EQ(p.b(t), std::exp(t));
    EXPECT_NEAR(b.b(t), 70.0 * std::log1p(std::exp(t)), 1e-12);
  }
  EXPECT_DOUBLE_EQ(g.mean_to_theta(1.25), 1.25);
  EXPECT_DOUBLE_EQ(p.mean_to_theta(3.0), std::log(3.0));
  EXPECT_NEAR(b.b1(0.0), 35.0, 1e-12);
}

TEST(FamilyKernel, SaturatedTermIsTheSupremumWithZeroLogZeroLimit) {
  const auto p = FamilyKernel::poisson();
  const auto b = FamilyKernel::binomial(5);
  EXPECT_EQ(p.saturated_term(0.0), 0.0);
  EXPECT_EQ(b.saturated_term(0.0), 0.0);
  EXPECT_NEAR(b.saturated_term(5.0), 0.0, 1e-12);
  // sup_theta y*theta - b(theta) by a dense scan.
  for (auto [k, y] : {std::pair{p, 3.0}, std::pair{b, 2.0}, std::pair{FamilyKernel::gaussian(), -1.5}}) {
    double best = -INFINITY;
    for (double t = -10.0; t <= 10.0; t += 1e-4) best = std::max(best, y * t - k.b(t));
    EXPECT_NEAR(k.saturated_term(y), best, 1e-7) << k.name();
  }
}

TEST(FamilyKernel, RejectsResponsesOutsideSupport) {
  EXPECT_FALSE(FamilyKernel::poisson().in_support(-1.0));
  EXPECT_FALSE(FamilyKernel::poisson().in_support(1.5));
  EXPECT_FALSE(FamilyKernel::binomial(3).in_support(4.0));
  EXPECT_TRUE(FamilyKernel::binomial(3).in_support(3.0));
  EXPECT_THROW(def_log_density(FamilyKernel::poisson(), DefParams{}, -1.0), DomainError);
  EXPECT_THROW(def_log_density(FamilyKernel::poisson(), DefParams{0.0, 0.0}, 1.0), DomainError);
  EXPECT_THROW(FamilyKernel::binomial(0), ConfigError);
  EXPECT_THROW(family_from_string("gamma"), ConfigError);
  EXPECT_EQ(family_from_string("dpoisson"), Family::poisson);
}

TEST(DefLogDensity, PoissonAtUnitDispersionIsThePoissonPmf) {
  const DefParams p{std::log(2.0), 1.0};
  EXPECT_NEAR(def_log_density(FamilyKernel::poisson(), p, 3.0), std::log(std::exp(-2.0) * 8.0 / 6.0),
              1e-12);
}

TEST(DefLogDensity, GaussianStandardAtZero) {
  EXPECT_NEAR(def_log_density(FamilyKernel::gaussian(), DefParams{}, 0.0),
              -0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
}

TEST(DefLogDensity, PoissonHalfDispersionAtZeroByHand) {
  // 1/2 log 0.5 + 0.5 (0 - e^0) + 0.5 * 0 + c(0) with c(0) = -log 0! = 0
  const DefParams p{0.0, 0.5};
  EXPECT_NEAR(def_log_density(FamilyKernel::poisson(), p, 0.0), 0.5 * std::log(0.5) - 0.5, 1e-14);
}

TEST(DefLogDensity, UnitDispersionReducesToTheBaseFamily) {
  Rng rng = make_stream(11, {3});
  for (int r = 0; r < 30; ++r) {
    const double t = uniform(rng, -2.0, 2.0);
    const double mu = std::exp(t);
    for (double y : {0.0, 1.0, 4.0, 9.0}) {
      EXPECT_NEAR(def_log_density(FamilyKernel::poisson(), {t, 1.0}, y), poisson_logpmf(y, mu), 1e-12);
    }
    const double p = 1.0 / (1.0 + std::exp(-t));
    for (double y : {0.0, 3.0, 12.0}) {
      EXPECT_NEAR(def_log_density(FamilyKernel::binomial(12), {t, 1.0}, y), binomial_logpmf(y, 12, p),
                  1e-12);
    }
    const double phi = uniform(rng, 0.3, 3.0);
    const double nu = uniform(rng, 0.5, 2.0);
    const double y = uniform(rng, -3.0, 3.0);
    EXPECT_NEAR(def_log_density(FamilyKernel::gaussian(), {t, 1.0, phi, nu}, y),
                normal_logpdf(y, t, phi / nu), 1e-12);
  }
}

TEST(DefLogDensity, GaussianIsExactlyNormalWithShrunkVariance) {
  Rng rng = make_stream(11, {4});
  for (int r = 0; r < 30; ++r) {
    const DefParams p{uniform(rng, -2, 2), uniform(rng, 0.2, 5), uniform(rng, 0.3, 2), uniform(rng, 0.5, 2)};
    const double y = uniform(rng, -4, 4);
    EXPECT_NEAR(def_log_density(FamilyKernel::gaussian(), p, y, true),
                normal_logpdf(y, p.theta, p.scale() / p.gamma), 1e-12);
    EXPECT_NEAR(def_log_density(FamilyKernel::gaussian(), p, y, false),
                def_log_density(FamilyKernel::gaussian(), p, y, true), 1e-12);
  }
  EXPECT_NEAR(def_log_density(FamilyKernel::gaussian(), {0.3, 2.0}, 1.0, true),
              normal_logpdf(1.0, 0.3, 0.5), 1e-14);
}

TEST(DefNormalizer, BinomialUnitDispersionIsExactlyOne) {
  for (double t : {-2.0, 0.0, 0.7}) {
    const auto n = def_normalizer(FamilyKernel::binomial(10), {t, 1.0});
    EXPECT_NEAR(n.constant, 1.0, 1e-13);
    EXPECT_EQ(n.truncation_bound, 10);
  }
}

TEST(DefNormalizer, PoissonMatchesBruteForceSum) {
  const auto k = FamilyKernel::poisson();
  for (auto [t, g] : {std::pair{std::log(4.0), 0.5}, {std::log(40.0), 0.25}, {0.0, 3.0}, {std::log(0.2), 0.7}}) {
    const DefParams p{t, g};
    const auto n = def_normalizer(k, p, 1e-12);
    EXPECT_NEAR(n.constant, brute_force_constant(k, p, 2000), 1e-10 * n.constant);
    EXPECT_LE(n.tail_mass, 1e-12);
    DefPmf pmf(k, p, 1e-12);
    const auto& pr = pmf.probabilities();
    EXPECT_NEAR(std::accumulate(pr.begin(), pr.end(), 0.0), 1.0, 1e-10);
  }
}

TEST(DefNormalizer, ThrowsWhenTheTailCannotBeReachedBelowTheCap) {
  // gamma tiny spreads mass far beyond max(10 mu + 100, 200).
  EXPECT_THROW(def_normalizer(FamilyKernel::poisson(), {std::log(50.0), 1e-4}, 1e-12), NumericError);
}

TEST(DefMoments, ClosedFormCases) {
  const auto g = def_moments(FamilyKernel::gaussian(), {0.0, 1.0});
  EXPECT_DOUBLE_EQ(g.mean, 0.0);
  EXPECT_DOUBLE_EQ(g.variance, 1.0);
  const auto b = def_moments(FamilyKernel::binomial(70), {0.0, 1.0});
  EXPECT_NEAR(b.mean, 35.0, 1e-9);
  EXPECT_NEAR(b.variance, 17.5, 1e-9);
}

TEST(DefMoments, PoissonApproximationAtMeanForty) {
  const auto m = def_moments(FamilyKernel::poisson(), {std::log(40.0), 0.5});
  EXPECT_LT(std::abs(m.mean - 40.0) / 40.0, 0.02);
  EXPECT_LT(std::abs(m.variance - 80.0) / 80.0, 0.05);
}

TEST(DefMoments, MeanTracksMuForLargeCounts) {
  for (double mu : {10.0, 25.0, 60.0}) {
    for (double g : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const auto m = def_moments(FamilyKernel::poisson(), {std::log(mu), g});
      EXPECT_LT(std::abs(m.mean - mu) / mu, 0.05) << mu << " " << g;
    }
  }
}

namespace {

struct SampleStats {
  double mean, var, se_mean, se_var;
};

SampleStats stats(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0;
  for (double x : v) m += x;
  m /= n;
  double m2 = 0, m4 = 0;
  for (double x : v) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  const double var = m2 * n / (n - 1);
  return {m, var, std::sqrt(var / n), std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
}

}  // namespace

TEST(DefSample, GaussianVariance) {
  Rng rng = make_stream(11, {5});
  const auto s = stats(def_sample(FamilyKernel::gaussian(), {1.0, 4.0, 0.64, 1.0}, rng, 100000));
  EXPECT_NEAR(s.mean, 1.0, 3 * s.se_mean);
  EXPECT_NEAR(s.var, 0.16, 3 * s.se_var);
}

TEST(DefSample, PoissonUnitDispersion) {
  Rng rng = make_stream(11, {6});
  const auto s = stats(def_sample(FamilyKernel::poisson(), {std::log(5.0), 1.0}, rng, 100000));
  EXPECT_NEAR(s.mean, 5.0, 3 * s.se_mean);
  EXPECT_NEAR(s.var, 5.0, 3 * s.se_var);
}

TEST(DefSample, PoissonOverdispersedMatchesTruncatedPmfMoments) {
  Rng rng = make_stream(11, {7});
  const DefParams p{std::log(5.0), 0.5};
  const auto exact = def_moments(FamilyKernel::poisson(), p);
  const auto s = stats(def_sample(FamilyKernel::poisson(), p, rng, 100000));
  EXPECT_NEAR(s.var, exact.variance, 0.05 * exact.variance);
  EXPECT_NEAR(s.var, 10.0, 0.05 * 10.0);
  EXPECT_NEAR(s.mean, exact.mean, 3 * s.se_mean);
}

TEST(DefSample, DeterministicGivenStream) {
  Rng a = make_stream(3, {9});
  Rng b = make_stream(3, {9});
  EXPECT_EQ(def_sample(FamilyKernel::binomial(70), {0.2, 0.6}, a, 500),
            def_sample(FamilyKernel::binomial(70), {0.2, 0.6}, b, 500));
}

TEST(DefPmf, QuantileIsTheInverseCdf) {
  DefPmf pmf(FamilyKernel::binomial(4), {0.0, 1.0});
  // Binomial(4, 1/2): cdf 1/16, 5/16, 11/16, 15/16, 1
  EXPECT_EQ(pmf.quantile(0.0), 0);
  EXPECT_EQ(pmf.quantile(0.0624), 0);
  EXPECT_EQ(pmf.quantile(0.0626), 1);
  EXPECT_EQ(pmf.quantile(0.5), 2);
  EXPECT_EQ(pmf.quantile(0.99), 4);
}
