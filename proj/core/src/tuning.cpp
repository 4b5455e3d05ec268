#include "defglm/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "defglm/errors.hpp"
#include "defglm/model.hpp"
#include "defglm/pmle.hpp"

namespace defglm {

namespace {
constexpr std::uint64_t kFoldStream = 0xF01DULL;
constexpr std::uint64_t kSampleStream = 0x5A3B1EULL;
constexpr std::uint64_t kFitStream = 0xF17ULL;
}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::bernoulli:
      return "bernoulli";
    case Method::gaussian:
      return "gaussian";
    case Method::pmle:
      return "pmle";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "bernoulli") return Method::bernoulli;
  if (name == "gaussian") return Method::gaussian;
  if (name == "pmle") return Method::pmle;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected bernoulli, gaussian or pmle)");
}

void Hyperbox::validate() const {
  if (!(lo1 >= 0.0 && lo2 >= 0.0)) throw ConfigError("hyperparameter box must lie in [0, inf)^2");
  if (!(hi1 >= lo1 && hi2 >= lo2)) throw ConfigError("hyperparameter box has an empty side");
  if (!std::isfinite(hi1) || !std::isfinite(hi2)) {
    throw ConfigError("hyperparameter box must be bounded");
  }
}

Hyperbox simulation_box(Method method) {
  switch (method) {
    case Method::bernoulli:
      return {0.0, 1.0, 0.0, 1.0};
    case Method::gaussian:
      return {0.0, 3.0, 0.0, 6.0};
    case Method::pmle:
      return {0.0, 15000.0, 0.0, 15000.0};
  }
  return {};
}

Hyperbox traffic_box(Method method) {
  switch (method) {
    case Method::bernoulli:
      return {0.0, 1.0, 0.0, 1.0};
    case Method::gaussian:
      return {0.0, 2.0, 0.0, 2.0};
    case Method::pmle:
      break;
  }
  throw ConfigError("no traffic hyperparameter box for method pmle");
}

void Problem::validate() const {
  if (X.rows() != y.size() || Z.rows() != y.size()) {
    throw ConfigError("designs and response disagree on the number of rows");
  }
  if (!(phi > 0.0)) throw ConfigError("scale phi must be positive");
  if (nu.size() != 0 && nu.size() != y.size()) {
    throw ConfigError("weight vector nu must have one entry per row");
  }
}

Problem Problem::subset(std::span<const int> rows) const {
  Problem out;
  out.kernel = kernel;
  out.phi = phi;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.X.resize(m, X.cols());
  out.Z.resize(m, Z.cols());
  out.y.resize(m);
  if (nu.size() != 0) out.nu.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const int i = rows[static_cast<std::size_t>(r)];
    out.X.row(r) = X.row(i);
    out.Z.row(r) = Z.row(i);
    out.y(r) = y(i);
    if (nu.size() != 0) out.nu(r) = nu(i);
  }
  return out;
}

namespace {

GlmSpec spec_for(const Problem& problem) {
  GlmSpec spec;
  spec.kernel = problem.kernel;
  spec.X = problem.X;
  spec.Z = problem.Z;
  spec.beta = Eigen::VectorXd::Zero(problem.X.cols());
  spec.alpha = Eigen::VectorXd::Zero(problem.Z.cols());
  spec.phi = problem.phi;
  spec.nu = problem.nu;
  return spec;
}

}  // namespace

FitResult fit_method(const Problem& problem, Method method, double p1, double p2,
                     const OptimConfig& config, Rng& rng) {
  problem.validate();
  const GlmSpec spec = spec_for(problem);
  switch (method) {
    case Method::bernoulli:
      return fit(spec, problem.y, NoiseSpec::bernoulli(p1, p2), config, rng);
    case Method::gaussian:
      return fit(spec, problem.y, NoiseSpec::gaussian(p1, p2), config, rng);
    case Method::pmle: {
      const DiffPenalty penalty(static_cast<int>(problem.X.cols()),
                                static_cast<int>(problem.Z.cols()), p1, p2);
      return pmle_fit(spec, problem.y, penalty, config, rng);
    }
  }
  throw ConfigError("unknown method");
}

void CvPlan::validate(Eigen::Index rows) const {
  box.validate();
  if (method == Method::bernoulli && !(box.hi1 < 1.0 + 1e-12 && box.hi2 < 1.0 + 1e-12)) {
    throw ConfigError("Bernoulli dropout probabilities must lie in [0, 1]");
  }
  if (samples < 1) throw ConfigError("cv samples must be positive");
  if (folds < 2) throw ConfigError("cv needs at least 2 folds");
  if (folds > rows) {
    throw ConfigError("cv folds (" + std::to_string(folds) + ") exceed the number of rows (" +
                      std::to_string(rows) + ")");
  }
}

std::vector<int> make_folds(Eigen::Index n, int k, Rng& rng) {
  if (k < 1) throw ConfigError("fold count must be positive");
  if (k > n) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  }
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) assignment[static_cast<std::size_t>(i)] = static_cast<int>(i % k);
  // Fisher-Yates with our own uniform draw so the result does not depend on
  // the standard library's distribution implementation.
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(assignment[static_cast<std::size_t>(i)], assignment[static_cast<std::size_t>(j)]);
  }
  return assignment;
}

std::vector<std::pair<double, double>> draw_samples(const CvPlan& plan) {
  Rng rng = make_stream(plan.seed, {kSampleStream});
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(plan.samples));
  for (int j = 0; j < plan.samples; ++j) {
    const double p1 = plan.box.lo1 + (plan.box.hi1 - plan.box.lo1) * uniform01(rng);
    const double p2 = plan.box.lo2 + (plan.box.hi2 - plan.box.lo2) * uniform01(rng);
    out.emplace_back(p1, p2);
  }
  return out;
}

std::vector<int> plan_folds(const CvPlan& plan, Eigen::Index n) {
  Rng rng = make_stream(plan.seed, {kFoldStream});
  return make_folds(n, plan.folds, rng);
}

CvRecord evaluate_sample(const Problem& problem, const CvPlan& plan, std::span<const int> folds,
                         int sample_index, double p1, double p2, const OptimConfig& config) {
  if (static_cast<Eigen::Index>(folds.size()) != problem.rows()) {
    throw ConfigError("fold assignment length does not match the data");
  }
  CvRecord rec;
  rec.sample_index = sample_index;
  rec.param1 = p1;
  rec.param2 = p2;
  rec.fold_loglik.assign(static_cast<std::size_t>(plan.folds),
                         -std::numeric_limits<double>::infinity());
  std::vector<int> train;
  std::vector<int> test;
  double sum = 0.0;
  for (int f = 0; f < plan.folds; ++f) {
    train.clear();
    test.clear();
    for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? test : train).push_back(static_cast<int>(i));
    const Problem train_set = problem.subset(train);
    OptimConfig cfg = config;
    cfg.batch_size = std::min<int>(cfg.batch_size, static_cast<int>(train.size()));
    Rng rng = make_stream(plan.seed, {kFitStream, static_cast<std::uint64_t>(sample_index),
                                      static_cast<std::uint64_t>(f)});
    const FitResult res = fit_method(train_set, plan.method, p1, p2, cfg, rng);
    double held_out = -std::numeric_limits<double>::infinity();
    if (!res.diverged) {
      const Problem test_set = problem.subset(test);
      GlmSpec spec = spec_for(test_set);
      spec.beta = res.beta;
      spec.alpha = res.alpha;
      held_out = loglik_with_base(spec, test_set.y);
    }
    if (!std::isfinite(held_out)) {
      ++rec.diverged_folds;
      held_out = -std::numeric_limits<double>::infinity();
      spdlog::info("cv: {} sample {} ({:.6g}, {:.6g}) fold {} diverged", to_string(plan.method),
                   sample_index, p1, p2, f + 1);
    }
    rec.fold_loglik[static_cast<std::size_t>(f)] = held_out;
    sum += held_out;
  }
  rec.mean_loglik = sum / plan.folds;
  return rec;
}

int select_best(std::span<const CvRecord> table) {
  int best = -1;
  for (std::size_t j = 0; j < table.size(); ++j) {
    const double v = table[j].mean_loglik;
    if (std::isnan(v) || v == -std::numeric_limits<double>::infinity()) continue;
    if (best < 0) {
      best = static_cast<int>(j);
      continue;
    }
    const auto& cur = table[static_cast<std::size_t>(best)];
    if (v > cur.mean_loglik || (v == cur.mean_loglik && table[j].sample_index < cur.sample_index)) {
      best = static_cast<int>(j);
    }
  }
  return best;
}

CvResult random_search_cv(const Problem& problem, const CvPlan& plan, const OptimConfig& config) {
  problem.validate();
  plan.validate(problem.rows());
  const auto samples = draw_samples(plan);
  const auto folds = plan_folds(plan, problem.rows());
  CvResult out;
  out.folds = plan.folds;
  out.table.reserve(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    out.table.push_back(evaluate_sample(problem, plan, folds, static_cast<int>(j),
                                        samples[j].first, samples[j].second, config));
    spdlog::debug("cv: {} sample {}/{} mean held-out loglik {:.6g}", to_string(plan.method), j + 1,
                  samples.size(), out.table.back().mean_loglik);
  }
  out.selected = select_best(out.table);
  if (out.selected < 0) {
    throw NumericError("cross-validation: every hyperparameter sample diverged");
  }
  auto& best = out.table[static_cast<std::size_t>(out.selected)];
  best.selected = true;
  out.param1 = best.param1;
  out.param2 = best.param2;
  return out;
}

}  // namespace defglm
