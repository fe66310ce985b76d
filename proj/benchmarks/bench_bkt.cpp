#include <benchmark/benchmark.h>

#include "skilltrace/bkt.hpp"
#include "skilltrace/bkt_fit.hpp"
#include "skilltrace/data_io.hpp"

using namespace skilltrace;

static void BM_PosteriorUpdate(benchmark::State& state) {
  const BktParams params{0.3, 0.2, 0.1, 0.2};
  double prior = 0.3;
  int observed = 1;
  for (auto _ : state) {
    prior = learn_transition(posterior_update(prior, params, observed), params);
    observed ^= 1;
    if (prior > 0.95) prior = 0.3;
    benchmark::DoNotOptimize(prior);
  }
}
BENCHMARK(BM_PosteriorUpdate);

static void BM_TraceStudent(benchmark::State& state) {
  SyntheticConfig config;
  config.skills.emplace("s", BktParams{0.3, 0.2, 0.1, 0.2});
  config.students = 1;
  config.steps = static_cast<std::size_t>(state.range(0));
  config.seed = 5;
  const auto data = generate_synthetic(config);
  SkillParams params;
  params["s"] = BktParams{0.3, 0.2, 0.1, 0.2};
  for (auto _ : state) {
    benchmark::DoNotOptimize(trace_student(data.events, params));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TraceStudent)->Arg(100)->Arg(1000);

static void BM_FitParameters(benchmark::State& state) {
  SyntheticConfig config;
  config.skills.emplace("s", BktParams{0.3, 0.2, 0.1, 0.2});
  config.students = static_cast<std::size_t>(state.range(0));
  config.steps = 25;
  config.seed = 11;
  const auto data = generate_synthetic(config);
  const auto sequences = outcome_sequences(data.events).at("s");
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_parameters(sequences));
  }
}
BENCHMARK(BM_FitParameters)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
