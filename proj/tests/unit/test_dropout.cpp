#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "defglm/dropout.hpp"
#include "defglm/errors.hpp"
#include "support.hpp"

using namespace defglm;
using namespace defglm::testing;

namespace {

const Family kFamilies[] = {Family::gaussian, Family::poisson, Family::binomial};

GlmSpec with(const GlmSpec& s, const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha) {
  GlmSpec out = s;
  out.beta = beta;
  out.alpha = alpha;
  return out;
}

GlmSpec single_row(const FamilyKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& beta) {
  GlmSpec s;
  s.kernel = k;
  s.X = x.transpose();
  s.Z = Eigen::MatrixXd::Ones(1, 1);
  s.beta = beta;
  s.alpha = Eigen::VectorXd::Zero(1);
  return s;
}

}  // namespace

TEST(NoiseSpec, VariancesAndValidation) {
  EXPECT_DOUBLE_EQ(NoiseSpec::bernoulli(0.5, 0.2).variance_mean(), 1.0);
  EXPECT_DOUBLE_EQ(NoiseSpec::bernoulli(0.5, 0.2).variance_disp(), 0.25);
  EXPECT_DOUBLE_EQ(NoiseSpec::gaussian(0.3, 2.0).variance_mean(), 0.09);
  EXPECT_DOUBLE_EQ(NoiseSpec::none().variance_disp(), 0.0);
  EXPECT_THROW(NoiseSpec::bernoulli(1.0, 0.0).validate(), ConfigError);
  EXPECT_THROW(NoiseSpec::gaussian(-0.1, 0.0).validate(), ConfigError);
  EXPECT_THROW(noise_kind_from_string("dropconnect"), ConfigError);
}

TEST(Perturb, ElementwiseProduct) {
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 1, 2).finished();
  EXPECT_EQ(perturb(x, Eigen::VectorXd::Ones(2)), x);
  EXPECT_EQ(perturb(x, (Eigen::VectorXd(2) << 2, 0).finished()), (Eigen::VectorXd(2) << 2, 0).finished());
  EXPECT_THROW(perturb(x, Eigen::VectorXd::Ones(3)), ConfigError);
  // (x . xi)'beta == x'(beta . xi)
  Rng rng = make_stream(41, {1});
  const Eigen::VectorXd a = random_vector(rng, 6, -1, 1), xi = random_vector(rng, 6, 0, 2),
                        beta = random_vector(rng, 6, -1, 1);
  EXPECT_DOUBLE_EQ(perturb(a, xi).dot(beta), a.dot(beta.cwiseProduct(xi)));
}

TEST(Perturb, BernoulliHalfIsUnbiased) {
  Rng rng = make_stream(41, {2});
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 1.0, -2.0, 0.5).finished();
  const int draws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sq = Eigen::VectorXd::Zero(3);
  for (int r = 0; r < draws; ++r) {
    Eigen::VectorXd xi(3);
    for (int j = 0; j < 3; ++j) {
      xi(j) = draw_multiplier(NoiseKind::bernoulli, 0.5, rng);
      ASSERT_TRUE(xi(j) == 0.0 || xi(j) == 2.0);
    }
    const Eigen::VectorXd xt = perturb(x, xi);
    sum += xt;
    sq += xt.cwiseProduct(xt);
  }
  for (int j = 0; j < 3; ++j) {
    const double m = sum(j) / draws;
    const double se = std::sqrt((sq(j) / draws - m * m) / draws);
    EXPECT_NEAR(m, x(j), 3 * se);
  }
}

TEST(McDropoutObjective, NoNoiseIsMinusLoglik) {
  Rng rng = make_stream(41, {3});
  for (Family f : kFamilies) {
    auto inst = random_instance(rng, f, 10, 3, 2);
    const auto est = mc_dropout_objective(inst.spec, inst.y, NoiseSpec::none(), 5, rng);
    EXPECT_EQ(est.value, -loglik(inst.spec, inst.y));
  }
}

TEST(McDropoutObjective, GaussianTaylorStepIsExact) {
  Rng rng = make_stream(41, {4});
  for (int r = 0; r < 5; ++r) {
    auto inst = random_instance(rng, Family::gaussian, 20, 4, 2);
    const double sigma = uniform(rng, 0.1, 0.8);
    const auto pm = penalty_matrices(inst.spec, NoiseSpec::none());
    const double closed =
        -loglik(inst.spec, inst.y) + 0.5 * sigma * sigma * pm.Theta.cwiseProduct(inst.spec.beta).squaredNorm();
    const auto mc = mc_dropout_objective(inst.spec, inst.y, NoiseSpec::gaussian(sigma, 0.0), 100000, rng);
    EXPECT_NEAR(mc.value, closed, 3 * mc.std_error);
    EXPECT_NEAR(penalized_objective(inst.spec, inst.y, NoiseSpec::gaussian(sigma, 0.0)), closed,
                1e-10 * std::abs(closed));
  }
}

TEST(McDropoutObjective, PoissonSmallNoiseWithinTheLognormalRemainder) {
  Rng rng = make_stream(41, {5});
  for (int r = 0; r < 5; ++r) {
    auto inst = random_instance(rng, Family::poisson, 15, 3, 2);
    const double sigma = 0.1;
    const NoiseSpec noise = NoiseSpec::gaussian(sigma, 0.0);
    double remainder = 0.0;
    for (Eigen::Index i = 0; i < 15; ++i) {
      const double w = std::exp(inst.spec.Z.row(i).dot(inst.spec.alpha)) / inst.spec.scale(i);
      remainder += w * remainder_poisson_exact(inst.spec.X.row(i).transpose(), inst.spec.beta, sigma);
    }
    const auto mc = mc_dropout_objective(inst.spec, inst.y, noise, 100000, rng);
    EXPECT_LE(std::abs(mc.value - penalized_objective(inst.spec, inst.y, noise)), remainder + 3 * mc.std_error);
  }
}

TEST(ExactPenaltyGap, GaussianClosedForm) {
  Rng rng = make_stream(41, {6});
  auto inst = random_instance(rng, Family::gaussian, 6, 3, 2);
  const double sigma = 0.4;
  const auto gaps = exact_penalty_gap(inst.spec, NoiseSpec::gaussian(sigma, 0.0), 200000, rng);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const double g = std::exp(inst.spec.Z.row(i).dot(inst.spec.alpha));
    const double expect = g * 0.5 * sigma * sigma *
                          inst.spec.X.row(i).transpose().cwiseProduct(inst.spec.beta).squaredNorm() /
                          inst.spec.scale(i);
    const auto& e = gaps[static_cast<std::size_t>(i)];
    EXPECT_NEAR(e.value, expect, 3 * e.std_error + 1e-15);
  }
}

TEST(ExactPenaltyGap, ZeroNoiseGivesZeroGaps) {
  Rng rng = make_stream(41, {7});
  auto inst = random_instance(rng, Family::poisson, 5, 3, 2);
  for (const auto& g : exact_penalty_gap(inst.spec, NoiseSpec::gaussian(0.0, 0.0), 100, rng)) {
    EXPECT_EQ(g.value, 0.0);
  }
  EXPECT_THROW(exact_penalty_gap(inst.spec, NoiseSpec::gaussian(0.1, 0.1), 100, rng), ConfigError);
}

TEST(ExactPenaltyGap, PoissonLognormalMean) {
  Rng rng = make_stream(41, {8});
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const auto s = single_row(FamilyKernel::poisson(), one, one);
  const auto g = exact_penalty_gap(s, NoiseSpec::gaussian(0.5, 0.0), 1000000, rng)[0];
  EXPECT_NEAR(g.value, std::numbers::e * std::expm1(0.125), 3 * g.std_error);
}

TEST(ExactPenaltyGap, JensenNonnegativity) {
  Rng rng = make_stream(41, {9});
  for (Family f : kFamilies) {
    for (int r = 0; r < 10; ++r) {
      auto inst = random_instance(rng, f, 5, 4, 2);
      const NoiseSpec noise = r % 2 ? NoiseSpec::bernoulli(uniform(rng, 0.05, 0.7), 0.0)
                                    : NoiseSpec::gaussian(uniform(rng, 0.05, 1.0), 0.0);
      for (const auto& g : exact_penalty_gap(inst.spec, noise, 2000, rng)) {
        EXPECT_GE(g.value, -3 * g.std_error);
      }
    }
  }
}

TEST(PenaltyMatrices, DefinitionsAndOrdering) {
  Rng rng = make_stream(41, {10});
  for (Family f : kFamilies) {
    auto inst = random_instance(rng, f, 25, 4, 3);
    const auto& s = inst.spec;
    const NoiseSpec noise = NoiseSpec::gaussian(0.4, 0.6);
    const auto pm = penalty_matrices(s, noise);
    for (Eigen::Index i = 0; i < 25; ++i) {
      const double gamma = std::exp(s.Z.row(i).dot(s.alpha));
      EXPECT_NEAR(pm.W(i), gamma * s.kernel.b2(s.X.row(i).dot(s.beta)) / s.scale(i), 1e-12 * pm.W(i));
      EXPECT_NEAR(pm.Lambda(i),
                  std::exp(0.5 * 0.36 * s.Z.row(i).transpose().cwiseProduct(s.alpha).squaredNorm()),
                  1e-12 * pm.Lambda(i));
      EXPECT_GE(pm.Lambda(i), 1.0);
      EXPECT_DOUBLE_EQ(pm.W_tilde(i), pm.Lambda(i) * pm.W(i));
      EXPECT_GT(pm.W_tilde(i), pm.W(i));
      EXPECT_GT(pm.W(i), 0.0);
    }
    for (Eigen::Index j = 0; j < 4; ++j) {
      double th = 0, tht = 0;
      for (Eigen::Index i = 0; i < 25; ++i) {
        th += s.X(i, j) * s.X(i, j) * pm.W(i);
        tht += s.X(i, j) * s.X(i, j) * pm.W_tilde(i);
      }
      EXPECT_NEAR(pm.Theta(j), std::sqrt(th), 1e-12 * pm.Theta(j));
      EXPECT_NEAR(pm.Theta_tilde(j), std::sqrt(tht), 1e-12 * pm.Theta_tilde(j));
      EXPECT_GT(pm.Theta_tilde(j), pm.Theta(j));
      EXPECT_GT(pm.Theta(j), 0.0);
    }
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(pm.Gamma(j), s.Z.col(j).norm(), 1e-12);
  }
}

TEST(PenaltyMatrices, NoDispersionNoiseLeavesThetaUnchanged) {
  Rng rng = make_stream(41, {11});
  auto inst = random_instance(rng, Family::poisson, 10, 3, 2);
  const auto pm = penalty_matrices(inst.spec, NoiseSpec::gaussian(0.5, 0.0));
  EXPECT_EQ(pm.Lambda, Eigen::VectorXd::Ones(10));
  EXPECT_EQ(pm.Theta_tilde, pm.Theta);
}

TEST(PenaltyMatrices, SingleGaussianRow) {
  const auto s = single_row(FamilyKernel::gaussian(), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
  const auto pm = penalty_matrices(s, NoiseSpec::none());
  EXPECT_EQ(pm.W(0), 1.0);
  EXPECT_EQ(pm.Theta(0), 1.0);
}

TEST(PenaltyMatrices, RareFeatureGetsItsSingleRowContribution) {
  Rng rng = make_stream(41, {12});
  auto inst = random_instance(rng, Family::poisson, 12, 3, 2);
  inst.spec.X.col(2).setZero();
  inst.spec.X(7, 2) = 0.8;
  const auto pm = penalty_matrices(inst.spec, NoiseSpec::none());
  EXPECT_EQ(pm.Theta(2), std::sqrt(0.8 * 0.8 * pm.W(7)));
  EXPECT_NEAR(pm.Theta(2) * pm.Theta(2), 0.8 * 0.8 * pm.W(7), 1e-15);
}

TEST(PenaltyMatrices, DegenerateColumnsAreReported) {
  Rng rng = make_stream(41, {13});
  auto inst = random_instance(rng, Family::gaussian, 8, 3, 3);
  inst.spec.X.col(1).setZero();
  inst.spec.Z.col(0).setZero();
  const auto pm = penalty_matrices(inst.spec, NoiseSpec::none());
  EXPECT_EQ(pm.degenerate_mean_columns, std::vector<int>{1});
  EXPECT_EQ(pm.degenerate_disp_columns, std::vector<int>{0});
  EXPECT_EQ(pm.Theta(1), 0.0);
}

TEST(ExpectedDispersion, LognormalMean) {
  const Eigen::VectorXd z = (Eigen::VectorXd(2) << 1, 0).finished();
  const Eigen::VectorXd a = (Eigen::VectorXd(2) << std::log(2.0), 5).finished();
  const double expect = 2.0 * std::exp(0.5 * std::log(2.0) * std::log(2.0));
  EXPECT_NEAR(expected_dispersion(z, a, 1.0), expect, 1e-12);
  EXPECT_NEAR(expect, 2.543, 1e-3);
  Rng rng = make_stream(41, {14});
  const auto mc = mc_expected_dispersion(z, a, NoiseKind::gaussian, 1.0, 1000000, rng);
  EXPECT_LT(std::abs(mc.value - expect) / expect, 0.01);
}

TEST(ExpectedDispersion, BernoulliNoiseCentralLimitRegime) {
  Rng rng = make_stream(41, {15});
  for (int r = 0; r < 3; ++r) {
    const Eigen::VectorXd z = random_vector(rng, 24, 0.5, 1.0);
    const Eigen::VectorXd a = random_vector(rng, 24, -0.15, 0.15);
    const double delta = uniform(rng, 0.1, 0.5);
    const double expect = expected_dispersion(z, a, delta / (1 - delta));
    const auto mc = mc_expected_dispersion(z, a, NoiseKind::bernoulli, delta, 1000000, rng);
    EXPECT_LT(std::abs(mc.value - expect) / expect, 0.05);
  }
}

TEST(PenalizedObjective, ZeroNoiseIsMinusLoglik) {
  Rng rng = make_stream(41, {16});
  for (Family f : kFamilies) {
    auto inst = random_instance(rng, f, 10, 3, 2);
    EXPECT_NEAR(penalized_objective(inst.spec, inst.y, NoiseSpec::gaussian(0.0, 0.0)), -loglik(inst.spec, inst.y),
                1e-12 * std::abs(loglik(inst.spec, inst.y)));
  }
}

TEST(PenalizedObjective, GradientMatchesFiniteDifferences) {
  Rng rng = make_stream(41, {17});
  for (Family f : kFamilies) {
    for (int r = 0; r < 20; ++r) {
      auto inst = random_instance(rng, f, 12, 4, 3);
      const auto& s = inst.spec;
      const NoiseSpec noise = r % 2 ? NoiseSpec::gaussian(uniform(rng, 0, 1), uniform(rng, 0, 1))
                                    : NoiseSpec::bernoulli(uniform(rng, 0, 0.6), uniform(rng, 0, 0.6));
      const auto og = penalized_objective_gradient(s, inst.y, noise);
      EXPECT_NEAR(og.value, penalized_objective(s, inst.y, noise), 1e-12 * std::abs(og.value));
      auto fb = [&](const Eigen::VectorXd& b) { return penalized_objective(with(s, b, s.alpha), inst.y, noise); };
      auto fa = [&](const Eigen::VectorXd& a) { return penalized_objective(with(s, s.beta, a), inst.y, noise); };
      for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LT(rel_err(central_difference(fb, s.beta, j, 1e-5), og.grad_beta(j)), 1e-6);
      for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LT(rel_err(central_difference(fa, s.alpha, j, 1e-5), og.grad_alpha(j)), 1e-6);
    }
  }
}

TEST(PenalizedObjective, UsesTheInflatedDispersion) {
  // Gaussian kernel: the objective rebuilt by hand from its parts.
  Rng rng = make_stream(41, {18});
  auto inst = random_instance(rng, Family::gaussian, 10, 3, 2);
  const auto& s = inst.spec;
  const NoiseSpec noise = NoiseSpec::gaussian(0.3, 0.5);
  const auto pm = penalty_matrices(s, noise);
  double expect = 0.0;
  for (Eigen::Index i = 0; i < 10; ++i) {
    const double eg = s.Z.row(i).dot(s.alpha) + 0.5 * 0.25 * s.Z.row(i).transpose().cwiseProduct(s.alpha).squaredNorm();
    expect -= observation_loglik(s.kernel, s.X.row(i).dot(s.beta), eg, inst.y(i), s.scale(i));
  }
  expect += 0.5 * 0.09 * pm.Theta_tilde.cwiseProduct(s.beta).squaredNorm();
  expect += 0.25 * 0.25 * pm.Gamma.cwiseProduct(s.alpha).squaredNorm();
  EXPECT_NEAR(penalized_objective(s, inst.y, noise), expect, 1e-10 * std::abs(expect));
}

TEST(Remainder, ZeroNoiseAndHandValue) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  EXPECT_EQ(remainder_poisson(one, one, 0.0), 0.0);
  EXPECT_EQ(remainder_binomial_bound(one, one, 0.0), 0.0);
  EXPECT_EQ(remainder_poisson_exact(one, one, 0.0), 0.0);
  // v = 0.25 enters squared in this form
  EXPECT_NEAR(remainder_poisson(one, one, 0.5), std::numbers::e * (std::exp(0.03125) - 0.03125 - 1), 1e-15);
  EXPECT_NEAR(remainder_poisson(one, one, 0.5), 0.00134, 1e-5);
  EXPECT_NEAR(remainder_poisson_exact(one, one, 0.5), std::numbers::e * (std::exp(0.125) - 0.125 - 1), 1e-15);
}

TEST(Remainder, LognormalFormMatchesMonteCarlo) {
  Rng rng = make_stream(41, {19});
  for (int r = 0; r < 5; ++r) {
    const Eigen::VectorXd x = random_vector(rng, 3, -1, 1), beta = random_vector(rng, 3, -1, 1);
    const double sigma = uniform(rng, 0.2, 0.7);
    const auto mc = mc_taylor_remainder(FamilyKernel::poisson(), x, beta, NoiseKind::gaussian, sigma, 400000, rng);
    EXPECT_NEAR(mc.value, remainder_poisson_exact(x, beta, sigma), 3 * mc.std_error);
  }
}

TEST(Remainder, ScaledBinomialBoundHolds) {
  Rng rng = make_stream(41, {20});
  for (int r = 0; r < 10; ++r) {
    const Eigen::VectorXd x = random_vector(rng, 3, -1, 1), beta = random_vector(rng, 3, -1.5, 1.5);
    const double sigma = uniform(rng, 0.05, 0.5);
    const int trials = 1 + r * 7;
    const auto mc = mc_taylor_remainder(FamilyKernel::binomial(trials), x, beta, NoiseKind::gaussian, sigma, 100000, rng);
    EXPECT_LE(mc.value, remainder_binomial_bound_scaled(x, beta, sigma, trials) + 3 * mc.std_error);
  }
}
