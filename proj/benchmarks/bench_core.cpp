#include <benchmark/benchmark.h>

#include "bsnas/cost_model.hpp"
#include "bsnas/evolution.hpp"
#include "bsnas/shrinking.hpp"
#include "bsnas/surrogate.hpp"

using namespace bsnas;

namespace {

const SearchSpace& space() {
  static const SearchSpace s = build_default_space();
  return s;
}

void BM_Cardinality(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(cardinality(space()));
}
BENCHMARK(BM_Cardinality);

void BM_Flops(benchmark::State& state) {
  Rng rng(1);
  const auto arch = random_architecture(space(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(flops(space(), arch).total_macs);
}
BENCHMARK(BM_Flops);

void BM_FairBatch(benchmark::State& state) {
  const OperationGraph graph(space());
  Rng rng(2);
  const int n_r = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fair_batch(graph, n_r, 200, rng));
  state.SetItemsProcessed(state.iterations() * n_r * 200);
}
BENCHMARK(BM_FairBatch)->Arg(3)->Arg(18);

void BM_ScoreOperations(benchmark::State& state) {
  const OperationGraph graph(space());
  Rng rng(3);
  std::vector<EvalRecord> records;
  for (auto& a : fair_batch(graph, 18, 200, rng)) {
    const double score = rng.uniform();
    records.push_back(make_record(std::move(a), score));
  }
  sort_records(records);
  for (auto _ : state) benchmark::DoNotOptimize(score_operations(graph, records));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}
BENCHMARK(BM_ScoreOperations);

void BM_SurrogateEvaluate(benchmark::State& state) {
  SurrogateEvaluator ev(space(), SurrogateParams::generate(space(), 4));
  ev.notify_training(OperationGraph(space()), 240);
  Rng rng(5), noise(6);
  const auto arch = random_architecture(space(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(ev.evaluate(arch, noise));
}
BENCHMARK(BM_SurrogateEvaluate);

void BM_ShrinkingDefaultSchedule(benchmark::State& state) {
  for (auto _ : state) {
    SurrogateEvaluator ev(space(), SurrogateParams::generate(space(), 7));
    auto s = ShrinkState::fresh(space(), 7);
    benchmark::DoNotOptimize(run_shrinking(space(), ShrinkSchedule{}, ev, s));
  }
}
BENCHMARK(BM_ShrinkingDefaultSchedule)->Unit(benchmark::kMillisecond);

void BM_EvolveFullSpace(benchmark::State& state) {
  SurrogateEvaluator ev(space(), SurrogateParams::generate(space(), 8));
  ev.notify_training(OperationGraph(space()), 240);
  const OperationGraph graph(space());
  for (auto _ : state) {
    benchmark::DoNotOptimize(evolve(space(), graph, EvolutionConfig{}, ev, Rng(1), Rng(2)));
  }
}
BENCHMARK(BM_EvolveFullSpace)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
