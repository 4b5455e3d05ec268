#include "defglm/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include <spdlog/spdlog.h>

#include "defglm/errors.hpp"

namespace defglm {

namespace {
constexpr std::uint64_t kDataStream = 0xDA7AULL;
constexpr std::uint64_t kReplicateFit = 0x4E91ULL;
constexpr std::uint64_t kCvStream = 0xC5ULL;
}  // namespace

double normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double test_f1(double x) {
  return 2.0 * std::sin(4.0 * std::numbers::pi * x) * normal_pdf(x, 0.5, 0.05 * 0.05);
}

double test_f2(double x) {
  return 40.0 + 10.0 * std::sin(4.0 * std::numbers::pi * x) * normal_pdf(x, 0.5, 0.05 * 0.05);
}

double test_g1(double x) {
  return std::exp(-0.08 * normal_pdf(x, 0.4, 0.04 * 0.04) - 0.08 * normal_pdf(x, 0.7, 0.02 * 0.02));
}

double test_g2(double x) {
  return std::exp(-0.08 * normal_pdf(x, 0.4, 0.03 * 0.03) + 0.08 * normal_pdf(x, 0.7, 0.03 * 0.03));
}

double test_g3(double x) {
  const double u = (x - 0.8) / 0.15;
  return std::exp(2.0 / 0.15 * normal_pdf(u, 0.0, 1.0) * normal_cdf(-4.0 * u));
}

double mean_function(int index, double x) {
  switch (index) {
    case 1:
      return test_f1(x);
    case 2:
      return test_f2(x);
    default:
      throw ConfigError("mean function index must be 1 or 2, got " + std::to_string(index));
  }
}

double dispersion_function(int index, double x) {
  switch (index) {
    case 0:
      return 1.0;
    case 1:
      return test_g1(x);
    case 2:
      return test_g2(x);
    case 3:
      return test_g3(x);
    default:
      throw ConfigError("dispersion function index must be 0..3, got " + std::to_string(index));
  }
}

FamilyKernel ScenarioConfig::kernel() const {
  switch (family) {
    case Family::gaussian:
      return FamilyKernel::gaussian();
    case Family::poisson:
      return FamilyKernel::poisson();
    case Family::binomial:
      return FamilyKernel::binomial(trials);
  }
  throw ConfigError("unknown family");
}

Hyperbox ScenarioConfig::box(Method method) const {
  const std::optional<Hyperbox>* o = nullptr;
  switch (method) {
    case Method::bernoulli:
      o = &bernoulli_box;
      break;
    case Method::gaussian:
      o = &gaussian_box;
      break;
    case Method::pmle:
      o = &pmle_box;
      break;
  }
  return (o != nullptr && o->has_value()) ? **o : simulation_box(method);
}

void ScenarioConfig::validate() const {
  if (mean_index < 1 || mean_index > 2) throw ConfigError("mean_index must be 1 or 2");
  if (disp_index < 0 || disp_index > 3) throw ConfigError("disp_index must be in 0..3");
  if (n < 2) throw ConfigError("n must be at least 2");
  if (replicates < 0) throw ConfigError("replicates must be nonnegative");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  if (family == Family::binomial && trials < 1) throw ConfigError("trials must be positive");
  if (grid_intervals < 1) throw ConfigError("grid_intervals must be positive");
  if (mean_knots < 4) throw ConfigError("mean_knots must be at least 4");
  if (disp_knots < 4) throw ConfigError("disp_knots must be at least 4");
  if (cv_folds < 2 || cv_folds > n) throw ConfigError("cv_folds must lie in [2, n]");
  if (cv_samples < 1) throw ConfigError("cv_samples must be positive");
  for (Method m : {Method::bernoulli, Method::gaussian, Method::pmle}) box(m).validate();
}

Dataset generate_dataset(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const FamilyKernel kernel = config.kernel();
  Dataset out;
  out.x.resize(static_cast<std::size_t>(config.n));
  out.y.resize(static_cast<std::size_t>(config.n));
  for (int k = 0; k < config.n; ++k) {
    const double x = uniform01(rng);
    const double mu = mean_function(config.mean_index, x);
    DefParams p;
    try {
      p.theta = kernel.mean_to_theta(mu);
    } catch (const DomainError& e) {
      std::ostringstream msg;
      msg << "mean " << mu << " at x=" << x << " is outside the " << kernel.name()
          << " mean domain";
      throw DomainError(msg.str());
    }
    p.gamma = dispersion_function(config.disp_index, x);
    p.phi = config.phi();
    out.x[static_cast<std::size_t>(k)] = x;
    out.y[static_cast<std::size_t>(k)] = def_sample(kernel, p, rng, 1).front();
  }
  return out;
}

Dataset generate_dataset(const ScenarioConfig& config, int replicate, std::uint64_t seed) {
  Rng rng = make_stream(seed, {kDataStream, static_cast<std::uint64_t>(config.family),
                               static_cast<std::uint64_t>(config.mean_index),
                               static_cast<std::uint64_t>(config.disp_index),
                               static_cast<std::uint64_t>(config.n),
                               static_cast<std::uint64_t>(replicate)});
  return generate_dataset(config, rng);
}

double rmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) {
    throw ConfigError("rmse: estimate has " + std::to_string(estimate.size()) +
                      " grid values, truth has " + std::to_string(truth.size()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double d = estimate[k] - truth[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

SplineDesign scenario_bases(const ScenarioConfig& config) {
  return SplineDesign{SplineBasis(0.0, 1.0, config.mean_knots, BoundaryMode::natural),
                      SplineBasis(0.0, 1.0, config.disp_knots, BoundaryMode::natural)};
}

Problem make_problem(const ScenarioConfig& config, const SplineDesign& bases, const Dataset& data) {
  Problem p;
  p.kernel = config.kernel();
  p.X = design_matrix(bases.mean_basis, data.x);
  p.Z = design_matrix(bases.disp_basis, data.x);
  p.y = Eigen::Map<const Eigen::VectorXd>(data.y.data(), static_cast<Eigen::Index>(data.y.size()));
  p.phi = config.phi();
  return p;
}

FittedCurves fitted_curves(const FamilyKernel& kernel, const SplineDesign& bases,
                           const FitResult& fit, std::span<const double> grid) {
  FittedCurves out;
  out.grid.assign(grid.begin(), grid.end());
  const auto eta_m = evaluate_effect(bases.mean_basis, fit.beta, grid);
  const auto eta_g = evaluate_effect(bases.disp_basis, fit.alpha, grid);
  out.mean.resize(grid.size());
  out.dispersion.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.mean[k] = kernel.b1(eta_m[k]);
    out.dispersion[k] = std::exp(eta_g[k]);
  }
  return out;
}

ScenarioResult run_scenario(const ScenarioConfig& config, std::span<const Method> methods,
                            std::uint64_t seed) {
  config.validate();
  if (methods.empty()) throw ConfigError("run_scenario needs at least one method");
  const SplineDesign bases = scenario_bases(config);
  const FamilyKernel kernel = config.kernel();
  const auto grid = uniform_grid(0.0, 1.0, config.grid_intervals);
  std::vector<double> true_mean(grid.size());
  std::vector<double> true_disp(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    true_mean[k] = mean_function(config.mean_index, grid[k]);
    true_disp[k] = dispersion_function(config.disp_index, grid[k]);
  }

  ScenarioResult out;
  const Problem cv_problem = make_problem(config, bases, generate_dataset(config, 1, seed));
  for (Method m : methods) {
    CvPlan plan;
    plan.method = m;
    plan.box = config.box(m);
    plan.samples = config.cv_samples;
    plan.folds = config.cv_folds;
    plan.seed = derive_seed(seed, {kCvStream, static_cast<std::uint64_t>(m)});
    spdlog::info("scenario: cross-validating {} ({} samples x {} folds)", to_string(m),
                 plan.samples, plan.folds);
    out.cv.push_back(MethodCv{m, random_search_cv(cv_problem, plan, config.optim)});
    spdlog::info("scenario: {} selected ({:.6g}, {:.6g})", to_string(m), out.cv.back().cv.param1,
                 out.cv.back().cv.param2);
  }

  out.diverged_counts.assign(methods.size(), 0);
  const std::string family_name(to_string(config.family));
  for (int r = 2; r <= config.replicates + 1; ++r) {
    const Problem problem = make_problem(config, bases, generate_dataset(config, r, seed));
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const Method m = methods[mi];
      const auto& cv = out.cv[mi].cv;
      Rng rng = make_stream(seed, {kReplicateFit, static_cast<std::uint64_t>(m),
                                   static_cast<std::uint64_t>(r)});
      const FitResult res = fit_method(problem, m, cv.param1, cv.param2, config.optim, rng);
      ScenarioRow row;
      row.family = family_name;
      row.scenario = config.disp_index;
      row.n = config.n;
      row.method = std::string(to_string(m));
      row.replicate = r;
      row.param1 = cv.param1;
      row.param2 = cv.param2;
      row.iterations = res.iterations;
      row.termination = std::string(to_string(res.termination));
      row.diverged = res.diverged;
      if (!res.diverged) {
        const FittedCurves curves = fitted_curves(kernel, bases, res, grid);
        row.rmse_mean = rmse(curves.mean, true_mean);
        row.rmse_disp = rmse(curves.dispersion, true_disp);
        if (!std::isfinite(row.rmse_mean) || !std::isfinite(row.rmse_disp)) row.diverged = true;
      }
      if (row.diverged) {
        row.rmse_mean = std::numeric_limits<double>::quiet_NaN();
        row.rmse_disp = std::numeric_limits<double>::quiet_NaN();
        ++out.diverged_counts[mi];
        spdlog::warn("scenario: {} replicate {} diverged", row.method, r);
      }
      out.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [&](const ScenarioRow& a, const ScenarioRow& b) {
    auto rank = [&](const std::string& name) {
      return std::find_if(methods.begin(), methods.end(),
                          [&](Method m) { return to_string(m) == name; }) -
             methods.begin();
    };
    return std::make_tuple(rank(a.method), a.replicate) < std::make_tuple(rank(b.method), b.replicate);
  });
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    if (out.diverged_counts[mi] > 0) {
      spdlog::warn("scenario: {} of {} {} replicates diverged and are excluded from summaries",
                   out.diverged_counts[mi], config.replicates, to_string(methods[mi]));
    }
  }
  return out;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile probability must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(std::span<const ScenarioRow> rows, bool truncate_disp) {
  // Keyed by (first-appearance rank of method, n) so output order follows the table.
  std::vector<std::string> method_order;
  std::map<std::pair<std::size_t, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    auto it = std::find(method_order.begin(), method_order.end(), r.method);
    if (it == method_order.end()) {
      method_order.push_back(r.method);
      it = method_order.end() - 1;
    }
    auto& g = groups[{static_cast<std::size_t>(it - method_order.begin()), r.n}];
    if (r.diverged) continue;
    g.first.push_back(r.rmse_mean);
    g.second.push_back(r.rmse_disp);
  }
  std::vector<SummaryRow> out;
  auto emit = [&](const std::string& method, int n, const char* measure, std::vector<double> v) {
    SummaryRow s;
    s.method = method;
    s.n = n;
    s.measure = measure;
    s.count = v.size();
    if (v.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.min = s.q25 = s.median = s.q75 = s.max = nan;
    } else {
      s.min = *std::min_element(v.begin(), v.end());
      s.max = *std::max_element(v.begin(), v.end());
      s.q25 = quantile_type7(v, 0.25);
      s.median = quantile_type7(v, 0.5);
      s.q75 = quantile_type7(v, 0.75);
    }
    out.push_back(std::move(s));
  };
  for (auto& [key, g] : groups) {
    const std::string& method = method_order[key.first];
    emit(method, key.second, "rmse_mean", g.first);
    std::vector<double> disp = g.second;
    if (truncate_disp && !disp.empty()) {
      const double cut = quantile_type7(disp, 0.95);
      std::erase_if(disp, [cut](double v) { return v > cut; });
    }
    emit(method, key.second, "rmse_disp", std::move(disp));
  }
  return out;
}

}  // namespace defglm
