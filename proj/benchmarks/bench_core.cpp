#include <benchmark/benchmark.h>

#include "defglm/basis.hpp"
#include "defglm/dropout.hpp"
#include "defglm/families.hpp"
#include "defglm/model.hpp"
#include "defglm/optim.hpp"
#include "defglm/simlab.hpp"

using namespace defglm;

namespace {

Problem scenario_problem(int n) {
  ScenarioConfig c;
  c.n = n;
  return make_problem(c, scenario_bases(c), generate_dataset(c, 1, 1));
}

GlmSpec spec_for(const Problem& p) {
  GlmSpec s;
  s.kernel = p.kernel;
  s.X = p.X;
  s.Z = p.Z;
  s.phi = p.phi;
  s.beta = Eigen::VectorXd::Constant(p.X.cols(), 0.1);
  s.alpha = Eigen::VectorXd::Zero(p.Z.cols());
  return s;
}

}  // namespace

static void BM_DesignMatrix(benchmark::State& state) {
  const SplineBasis basis(0.0, 1.0, 30, BoundaryMode::natural);
  const auto x = uniform_grid(0.0, 1.0, static_cast<int>(state.range(0)) - 1);
  for (auto _ : state) benchmark::DoNotOptimize(design_matrix(basis, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DesignMatrix)->Arg(250)->Arg(1000);

static void BM_Score(benchmark::State& state) {
  const Problem p = scenario_problem(static_cast<int>(state.range(0)));
  const GlmSpec s = spec_for(p);
  for (auto _ : state) benchmark::DoNotOptimize(score(s, p.y));
}
BENCHMARK(BM_Score)->Arg(250)->Arg(1000);

static void BM_PenalizedObjectiveGradient(benchmark::State& state) {
  const Problem p = scenario_problem(250);
  const GlmSpec s = spec_for(p);
  const NoiseSpec noise = NoiseSpec::bernoulli(0.3, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(penalized_objective_gradient(s, p.y, noise));
}
BENCHMARK(BM_PenalizedObjectiveGradient);

static void BM_FitThousandIterations(benchmark::State& state) {
  const Problem p = scenario_problem(250);
  const GlmSpec s = spec_for(p);
  OptimConfig c;
  c.max_iterations = 1000;
  for (auto _ : state) {
    Rng rng = make_stream(3, {1});
    benchmark::DoNotOptimize(fit(s, p.y, NoiseSpec::bernoulli(0.3, 0.3), c, rng));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_FitThousandIterations)->Unit(benchmark::kMillisecond);

static void BM_PoissonPmf(benchmark::State& state) {
  DefParams params;
  params.theta = std::log(static_cast<double>(state.range(0)));
  params.gamma = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(DefPmf(FamilyKernel::poisson(), params));
}
BENCHMARK(BM_PoissonPmf)->Arg(5)->Arg(200);

static void BM_BinomialSample(benchmark::State& state) {
  DefParams params;
  params.theta = 0.3;
  params.gamma = 1.7;
  Rng rng = make_stream(9, {1});
  for (auto _ : state) benchmark::DoNotOptimize(def_sample(FamilyKernel::binomial(70), params, rng, 1000));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_BinomialSample);
BENCHMARK_MAIN();
