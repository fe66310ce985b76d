#include <benchmark/benchmark.h>

#include "skilltrace/allocation.hpp"

using namespace skilltrace;

static AllocationProblem small_instance() {
  AllocationProblem p;
  p.sessions = 3;
  p.resources = 2;
  p.budgets.assign(3, 1.0);
  p.volatility = 0.5;
  p.influence = make_influence(InfluenceKind::linear, 1.0, {1.0, 3.0});
  p.precedence.push_back({1, 0, 2.0, 0.5});
  return p;
}

static void BM_SolveSmallLinear(benchmark::State& state) {
  const AllocationProblem p = small_instance();
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_allocation(p));
  }
}
BENCHMARK(BM_SolveSmallLinear)->Unit(benchmark::kMillisecond);

static void BM_SolveCaseStudyProfile(benchmark::State& state) {
  const auto profiles = demo_profiles();
  const AllocationProblem& p = profiles[static_cast<std::size_t>(state.range(0))];
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_allocation(p));
  }
}
BENCHMARK(BM_SolveCaseStudyProfile)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_SentimentTrajectory(benchmark::State& state) {
  const auto profiles = demo_profiles();
  const AllocationProblem& p = profiles[0];
  const AllocationMatrix R(2, std::vector<double>(30, 0.5));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sentiment_trajectory(R, p));
  }
}
BENCHMARK(BM_SentimentTrajectory);

BENCHMARK_MAIN();
