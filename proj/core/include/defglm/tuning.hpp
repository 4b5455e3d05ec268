#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "defglm/dropout.hpp"
#include "defglm/families.hpp"
#include "defglm/optim.hpp"
#include "defglm/rng.hpp"

namespace defglm {

/// Regularisation methods compared in the simulations.
enum class Method { bernoulli, gaussian, pmle };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

/// Axis-aligned hyperparameter rectangle [lo1, hi1] x [lo2, hi2]. The first
/// coordinate drives the mean side, the second the dispersion side.
struct Hyperbox {
  double lo1 = 0.0;
  double hi1 = 1.0;
  double lo2 = 0.0;
  double hi2 = 1.0;

  bool contains(double p1, double p2) const {
    return p1 >= lo1 && p1 <= hi1 && p2 >= lo2 && p2 <= hi2;
  }
  void validate() const;
};

/// Rectangles used in the simulation study.
Hyperbox simulation_box(Method method);
/// Rectangles used for the traffic data (no PMLE).
Hyperbox traffic_box(Method method);

/// Data and designs shared by every fit of a tuning run.
struct Problem {
  FamilyKernel kernel = FamilyKernel::gaussian();
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  Eigen::VectorXd y;
  double phi = 1.0;
  Eigen::VectorXd nu;  ///< empty means all ones

  Eigen::Index rows() const { return y.size(); }
  void validate() const;
  /// Restriction to the given rows.
  Problem subset(std::span<const int> rows) const;
};

/// Fits one method at hyperparameters (p1, p2): dropout probabilities for
/// Bernoulli, standard deviations for Gaussian, smoothing parameters for PMLE.
FitResult fit_method(const Problem& problem, Method method, double p1, double p2,
                     const OptimConfig& config, Rng& rng);

struct CvPlan {
  Method method = Method::bernoulli;
  Hyperbox box;
  int samples = 500;
  int folds = 5;
  std::uint64_t seed = 0;

  void validate(Eigen::Index rows) const;
};

/// Fold index in 0..k-1 for each row; fold sizes differ by at most one.
std::vector<int> make_folds(Eigen::Index n, int k, Rng& rng);

struct CvRecord {
  int sample_index = 0;
  double param1 = 0.0;
  double param2 = 0.0;
  std::vector<double> fold_loglik;
  double mean_loglik = -std::numeric_limits<double>::infinity();
  bool selected = false;
  int diverged_folds = 0;
};

struct CvResult {
  std::vector<CvRecord> table;
  int selected = -1;  ///< index into table
  double param1 = 0.0;
  double param2 = 0.0;
  int folds = 0;
};

/// The plan's s uniform draws from its box, in sample order.
std::vector<std::pair<double, double>> draw_samples(const CvPlan& plan);

/// The plan's fold assignment for n rows.
std::vector<int> plan_folds(const CvPlan& plan, Eigen::Index n);

/// Held-out log-likelihood (base measure included) of every fold for one
/// sample. Each fold fit uses a stream keyed by (sample index, fold index),
/// so the result does not depend on evaluation order.
CvRecord evaluate_sample(const Problem& problem, const CvPlan& plan, std::span<const int> folds,
                         int sample_index, double p1, double p2, const OptimConfig& config);

/// argmax of mean_loglik; ties go to the smallest sample index. Returns -1
/// when every entry is -inf or NaN.
int select_best(std::span<const CvRecord> table);

CvResult random_search_cv(const Problem& problem, const CvPlan& plan, const OptimConfig& config);

}  // namespace defglm
