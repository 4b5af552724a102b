#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bsnas/brute_force.hpp"
#include "bsnas/cost_model.hpp"
#include "bsnas/errors.hpp"
#include "bsnas/evolution.hpp"
#include "bsnas/surrogate.hpp"
#include "support/fixtures.hpp"

using namespace bsnas;

namespace {

SurrogateEvaluator trained(const SearchSpace& space, std::uint64_t seed, double coupling = 0.2,
                           double noise = 0.0) {
  SurrogateEvaluator ev(space, SurrogateParams::generate(space, seed, coupling, 60.0, noise));
  ev.notify_training(OperationGraph(space), 240);
  return ev;
}

class Collector final : public EvolutionSink {
 public:
  void on_eval(int, int, const EvalRecord& r) override { records.push_back(r); }
  void on_iteration(const IterationStats& s) override { stats.push_back(s); }
  std::vector<EvalRecord> records;
  std::vector<IterationStats> stats;
};

}  // namespace

TEST(Crossover, IdenticalParents) {
  const auto space = build_default_space();
  Rng rng(1);
  const auto a = random_architecture(space, rng);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(crossover(a, a, rng), a);
}

TEST(Crossover, OneGeneDifference) {
  const auto space = build_default_space();
  Rng rng(2);
  const auto a = random_architecture(space, rng);
  auto b = a;
  b.layer_genes[4] = a.layer_genes[4] == LayerGene{3, 3} ? LayerGene{7, 6} : LayerGene{3, 3};
  for (int i = 0; i < 50; ++i) {
    const auto c = crossover(a, b, rng);
    EXPECT_TRUE(c == a || c == b);
  }
}

TEST(Crossover, GeneSourcesAreFair) {
  const auto space = build_default_space();
  auto a = extreme_architecture(space, false, ArchMode::supernet);
  auto b = extreme_architecture(space, true, ArchMode::supernet);
  Rng rng(3);
  const int n = 10000;
  std::vector<int> from_a(space.layer_count() + space.cluster_count(), 0);
  for (int i = 0; i < n; ++i) {
    const auto c = crossover(a, b, rng);
    for (int l = 0; l < space.layer_count(); ++l) from_a[l] += c.layer_genes[l] == a.layer_genes[l];
    for (int k = 0; k < space.cluster_count(); ++k) {
      from_a[space.layer_count() + k] += c.cluster_genes[k] == a.cluster_genes[k];
    }
  }
  // 25 genes share the bound, so 5 sigma keeps the family-wise false alarm rate small.
  const double sigma = std::sqrt(n * 0.25);
  for (int count : from_a) EXPECT_LT(std::abs(count - n / 2.0), 5 * sigma);
}

TEST(Crossover, RepairsDeadGenes) {
  const auto space = build_default_space();
  Rng graph_rng(4), rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = fixtures::random_graph(space, graph_rng, 0.6);
    for (int i = 0; i < 200; ++i) {
      const auto a = random_architecture(space, rng, &g);
      const auto b = random_architecture(space, rng, &g);
      ASSERT_TRUE(g.admits(crossover(a, b, rng, &g)));
    }
  }
}

TEST(Mutate, ZeroProbabilityIsIdentity) {
  const auto space = build_default_space();
  OperationGraph g(space);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_architecture(space, rng);
    EXPECT_EQ(mutate(a, g, 0.0, rng), a);
  }
}

TEST(Mutate, SingletonOptionsAreIdentity) {
  const auto space = build_default_space();
  OperationGraph g(space);
  for (int l = 0; l < g.layer_count(); ++l) {
    for (int op = 1; op < g.op_count(l); ++op) g.set_alive(l, op, false);
  }
  Rng rng(7);
  const auto a = random_architecture(space, rng, &g);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(mutate(a, g, 1.0, rng), a);
}

TEST(Mutate, ChangeRateMatchesExpectation) {
  const auto space = build_default_space();
  OperationGraph g(space);
  Rng rng(8);
  const int n = 10000;
  long changed = 0, total = 0;
  for (int i = 0; i < n; ++i) {
    const auto a = random_architecture(space, rng);
    const auto m = mutate(a, g, 0.1, rng);
    for (int l = 0; l < space.layer_count(); ++l) {
      changed += m.layer_genes[l] != a.layer_genes[l];
      ++total;
    }
  }
  const double p = 0.1 * (1.0 - 1.0 / 6.0);
  const double sigma = std::sqrt(total * p * (1 - p));
  EXPECT_LT(std::abs(changed - total * p), 4 * sigma);
}

TEST(Mutate, StaysAliveUnderMasks) {
  const auto space = build_default_space();
  Rng graph_rng(9), rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = fixtures::random_graph(space, graph_rng, 0.6);
    for (int i = 0; i < 200; ++i) {
      const auto a = random_architecture(space, rng, &g);
      ASSERT_TRUE(g.admits(mutate(a, g, 0.5, rng)));
    }
  }
}

TEST(EvolutionConfig, Validation) {
  EvolutionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.elite_k = 100;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.offspring_crossover = 60;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.mutation_prob = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.flops_min = 10;
  c.flops_max = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(InitPopulation, DistinctAndEvaluated) {
  const auto space = build_default_space();
  auto ev = trained(space, 1);
  const auto pop = init_population(space, OperationGraph(space), EvolutionConfig{}, ev, Rng(1), Rng(2));
  ASSERT_EQ(pop.members.size(), 75u);
  std::set<std::string> keys;
  for (const auto& r : pop.members) keys.insert(r.key);
  EXPECT_EQ(keys.size(), 75u);
  for (std::size_t i = 1; i < pop.members.size(); ++i) {
    EXPECT_GE(pop.members[i - 1].score, pop.members[i].score);
  }
}

TEST(InitPopulation, InfeasibleWindow) {
  const auto space = build_default_space();
  auto ev = trained(space, 1);
  EvolutionConfig c;
  c.flops_max = flops_bounds(space).first - 1;
  c.max_resample = 5;
  try {
    init_population(space, OperationGraph(space), c, ev, Rng(1), Rng(2));
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("closest candidate"), std::string::npos);
  }
}

TEST(InitPopulation, WindowRespected) {
  const auto space = build_default_space();
  auto ev = trained(space, 1);
  EvolutionConfig c;
  c.flops_min = 400'000'000;
  c.flops_max = 500'000'000;
  const auto pop = init_population(space, OperationGraph(space), c, ev, Rng(3), Rng(4));
  EXPECT_EQ(pop.members.size(), 75u);
  for (const auto& r : pop.members) {
    const auto macs = flops(space, release_spring_blocks(space, r.arch)).total_macs;
    EXPECT_GE(macs, 400'000'000);
    EXPECT_LE(macs, 500'000'000);
  }
}

TEST(Evolve, FindsBruteForceOptimumOnSeparableSpace) {
  const auto space = fixtures::eighty_one_space();
  auto ev = trained(space, 5, 0.0);
  const auto oracle = brute_force_best(space, OperationGraph(space), ev, 81);
  EvolutionConfig c;
  c.population = 20;
  c.elite_k = 5;
  c.offspring_crossover = 7;
  c.offspring_mutation = 7;
  const auto result = evolve(space, OperationGraph(space), c, ev, Rng(1), Rng(2));
  EXPECT_EQ(result.best.key, oracle.arch.canonical());
  // The space is exhausted long before 20 iterations.
  EXPECT_EQ(result.evaluations, 81u);
}

TEST(Evolve, BudgetDeterminismAndMonotonicity) {
  const auto space = build_default_space();
  auto ev = trained(space, 2, 0.2, 0.01);
  EvolutionConfig c;
  c.flops_max = 450'000'000;
  Collector a_sink, b_sink;
  const auto a = evolve(space, OperationGraph(space), c, ev, Rng(7), Rng(8), &a_sink);
  const auto b = evolve(space, OperationGraph(space), c, ev, Rng(7), Rng(8), &b_sink, 4);
  EXPECT_LE(a.evaluations, 75u * 21u);
  EXPECT_EQ(a.evaluations, a_sink.records.size());
  EXPECT_EQ(a.best.key, b.best.key);
  EXPECT_EQ(a.best.score, b.best.score);
  ASSERT_EQ(a_sink.records.size(), b_sink.records.size());
  for (std::size_t i = 0; i < a_sink.records.size(); ++i) {
    EXPECT_EQ(a_sink.records[i].key, b_sink.records[i].key);
  }
  ASSERT_EQ(a.history.size(), 21u);
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    EXPECT_GE(a.history[i].best_ever, a.history[i - 1].best_ever);
  }
  std::set<std::string> keys;
  for (const auto& r : a_sink.records) {
    EXPECT_LE(r.score, a.best.score);
    EXPECT_LE(flops(space, release_spring_blocks(space, r.arch)).total_macs, 450'000'000);
    keys.insert(r.key);
  }
  EXPECT_EQ(keys.size(), a_sink.records.size());
}

TEST(Evolve, RespectsAliveMask) {
  const auto space = build_default_space();
  auto ev = trained(space, 3);
  Rng graph_rng(11);
  const auto g = fixtures::random_graph(space, graph_rng, 0.5);
  Collector sink;
  EvolutionConfig c;
  c.iterations = 5;
  evolve(space, g, c, ev, Rng(1), Rng(2), &sink);
  for (const auto& r : sink.records) EXPECT_TRUE(g.admits(r.arch));
}

TEST(Evolve, SingleArchitectureSpace) {
  const auto space = build_default_space();
  OperationGraph g(space);
  for (int l = 0; l < g.layer_count(); ++l) {
    for (int op = 1; op < g.op_count(l); ++op) g.set_alive(l, op, false);
  }
  auto ev = trained(space, 4);
  EvolutionConfig c;
  c.max_resample = 3;
  const auto result = evolve(space, g, c, ev, Rng(1), Rng(2));
  EXPECT_EQ(result.evaluations, 1u);
  EXPECT_TRUE(g.admits(result.best.arch));
}
