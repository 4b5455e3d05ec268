#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defglm/basis.hpp"
#include "defglm/families.hpp"
#include "defglm/optim.hpp"
#include "defglm/rng.hpp"
#include "defglm/tuning.hpp"

namespace defglm {

/// Density of N(mean, variance) at x.
double normal_pdf(double x, double mean, double variance);
/// Standard normal CDF.
double normal_cdf(double x);

double test_f1(double x);
double test_f2(double x);
double test_g1(double x);
double test_g2(double x);
double test_g3(double x);

/// f_i for i in {1, 2}.
double mean_function(int index, double x);
/// g_j for j in {1, 2, 3}; j = 0 is the constant 1.
double dispersion_function(int index, double x);

struct ScenarioConfig {
  Family family = Family::gaussian;
  int mean_index = 1;
  int disp_index = 1;
  int n = 250;
  int replicates = 100;
  double sigma2 = 0.64;  ///< phi for the Gaussian family
  int trials = 70;       ///< N for the binomial family
  int grid_intervals = 500;
  int mean_knots = 30;
  int disp_knots = 20;
  int cv_folds = 5;
  int cv_samples = 500;
  /// Per-method rectangle overrides; the simulation defaults otherwise.
  std::optional<Hyperbox> bernoulli_box;
  std::optional<Hyperbox> gaussian_box;
  std::optional<Hyperbox> pmle_box;
  OptimConfig optim;

  /// Family-appropriate mean index: f1 for Gaussian, f2 otherwise.
  static int default_mean_index(Family family) { return family == Family::gaussian ? 1 : 2; }

  FamilyKernel kernel() const;
  double phi() const { return family == Family::gaussian ? sigma2 : 1.0; }
  Hyperbox box(Method method) const;
  void validate() const;
};

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
};

/// Replicate m (1-based) of the scenario; depends only on (seed, m).
Dataset generate_dataset(const ScenarioConfig& config, int replicate, std::uint64_t seed);
/// Same draw from a caller-owned stream.
Dataset generate_dataset(const ScenarioConfig& config, Rng& rng);

/// (sum_k (a_k - b_k)^2)^{1/2}; unnormalised.
double rmse(std::span<const double> estimate, std::span<const double> truth);

/// Mean and dispersion bases plus designs for covariates on [0, 1].
struct SplineDesign {
  SplineBasis mean_basis;
  SplineBasis disp_basis;
};
SplineDesign scenario_bases(const ScenarioConfig& config);
Problem make_problem(const ScenarioConfig& config, const SplineDesign& bases, const Dataset& data);

struct FittedCurves {
  std::vector<double> grid;
  std::vector<double> mean;        ///< b'(B_mu(x)'beta)
  std::vector<double> dispersion;  ///< exp(B_gamma(x)'alpha)
};
FittedCurves fitted_curves(const FamilyKernel& kernel, const SplineDesign& bases,
                           const FitResult& fit, std::span<const double> grid);

struct ScenarioRow {
  std::string family;
  int scenario = 0;
  int n = 0;
  std::string method;
  int replicate = 0;
  double rmse_mean = 0.0;
  double rmse_disp = 0.0;
  double param1 = 0.0;
  double param2 = 0.0;
  long iterations = 0;
  std::string termination;
  bool diverged = false;
};

struct MethodCv {
  Method method = Method::bernoulli;
  CvResult cv;
};

struct ScenarioResult {
  std::vector<ScenarioRow> rows;  ///< sorted by (method order given, replicate)
  std::vector<MethodCv> cv;
  std::vector<int> diverged_counts;  ///< per method, in the given order
};

/// CV on replicate 1 for each method, then fits of replicates 2..R+1 with the
/// selected pair. Divergent replicates stay in the table with the flag set and
/// NaN RMSEs.
ScenarioResult run_scenario(const ScenarioConfig& config, std::span<const Method> methods,
                            std::uint64_t seed);

/// Sample quantile, R's type 7 (linear interpolation of order statistics).
double quantile_type7(std::vector<double> values, double p);

struct SummaryRow {
  std::string method;
  int n = 0;
  std::string measure;  ///< rmse_mean or rmse_disp
  std::size_t count = 0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

/// Boxplot statistics per (method, n, measure) over non-divergent rows. With
/// `truncate_disp`, dispersion RMSEs above their 95th percentile are dropped
/// before summarising.
std::vector<SummaryRow> summarize(std::span<const ScenarioRow> rows, bool truncate_disp);

}  // namespace defglm
