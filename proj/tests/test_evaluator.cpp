#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <sstream>

#include "bsnas/brute_force.hpp"
#include "bsnas/errors.hpp"
#include "bsnas/stats.hpp"
#include "bsnas/surrogate.hpp"
#include "bsnas/table_evaluator.hpp"
#include "support/fixtures.hpp"

using namespace bsnas;

namespace {

SurrogateEvaluator surrogate(const SearchSpace& space, std::uint64_t seed, double noise = 0.0,
                             double coupling = 0.2) {
  return SurrogateEvaluator(space, SurrogateParams::generate(space, seed, coupling, 60.0, noise));
}

class Failing final : public Evaluator {
 public:
  std::string name() const override { return "failing"; }
  double evaluate(const Architecture& arch, Rng&) const override {
    if (arch.layer_genes[0].kernel == 5) throw std::runtime_error("boom");
    return arch.layer_genes[0].kernel == 7 ? 1.5 : 0.5;
  }
};

}  // namespace

TEST(Surrogate, ParamsAreReproducible) {
  const auto space = build_default_space();
  const auto a = SurrogateParams::generate(space, 5);
  const auto b = SurrogateParams::generate(space, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, SurrogateParams::generate(space, 6));
  nlohmann::json j = a;
  EXPECT_EQ(j.get<SurrogateParams>(), a);
  EXPECT_EQ(a.quality.size(), 19u);
  EXPECT_EQ(a.quality[0].size(), 18u);
  EXPECT_EQ(a.interaction[0].size(), 18u * 18u);
}

TEST(Surrogate, LongTrainingApproachesTrueFitness) {
  const auto space = build_default_space();
  auto ev = surrogate(space, 1);
  OperationGraph g(space);
  ev.notify_training(g, 1e9);
  Rng rng(2), noise(3);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_architecture(space, rng);
    EXPECT_NEAR(ev.evaluate(a, noise), ev.true_fitness(a), 1e-6);
  }
}

TEST(Surrogate, UntrainedUsesOnlyChannelAndInteraction) {
  const auto space = build_default_space();
  auto params = SurrogateParams::generate(space, 4, 0.2, 60.0, 0.0);
  for (auto& row : params.quality) {
    for (auto& u : row) u *= 100.0;  // must not matter at n = 0
  }
  SurrogateEvaluator big(space, params);
  SurrogateEvaluator base(space, SurrogateParams::generate(space, 4, 0.2, 60.0, 0.0));
  Rng rng(5), noise(6);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_architecture(space, rng);
    EXPECT_DOUBLE_EQ(big.evaluate(a, noise), base.evaluate(a, noise));
  }
}

TEST(Surrogate, ScoresStayInRange) {
  const auto space = build_default_space();
  auto ev = surrogate(space, 7, 0.01);
  ev.notify_training(OperationGraph(space), 240);
  Rng rng(8), noise(9);
  double lo = 1, hi = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto t = ev.true_fitness(random_architecture(space, rng));
    lo = std::min(lo, t);
    hi = std::max(hi, t);
    const auto s = ev.evaluate(random_architecture(space, rng), noise);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
  }
  EXPECT_GT(lo, 0.4);
  EXPECT_LT(hi, 0.8);
  EXPECT_LT(hi - lo, 0.4);
  EXPECT_GT(hi - lo, 0.15);
}

TEST(Surrogate, TrainingMonotoneForNonNegativeQuality) {
  const auto space = build_default_space();
  auto params = SurrogateParams::generate(space, 10, 0.2, 60.0, 0.0);
  for (auto& row : params.quality) {
    for (auto& u : row) u = std::abs(u);
  }
  SurrogateEvaluator ev(space, params);
  OperationGraph g(space);
  Rng rng(11), noise(12);
  std::vector<Architecture> archs;
  for (int i = 0; i < 20; ++i) archs.push_back(random_architecture(space, rng));
  std::vector<double> previous(archs.size(), 0.0);
  for (int step = 0; step < 10; ++step) {
    for (std::size_t i = 0; i < archs.size(); ++i) {
      const double s = ev.evaluate(archs[i], noise);
      EXPECT_GE(s, previous[i]);
      previous[i] = s;
    }
    ev.notify_training(g, 30);
  }
}

TEST(Surrogate, FullGraphExposureUnits) {
  const auto space = build_default_space();
  auto ev = surrogate(space, 1);
  ev.notify_training(OperationGraph(space), 240);
  for (int l = 0; l < space.layer_count(); ++l) {
    for (int op = 0; op < 18; ++op) EXPECT_NEAR(ev.exposure(l, op), 240.0, 1e-9);
  }
  // Shrinking to one op per layer hands that op the whole budget.
  OperationGraph g(space);
  for (int l = 0; l < g.layer_count(); ++l) {
    for (int op = 1; op < g.op_count(l); ++op) g.set_alive(l, op, false);
  }
  ev.reset_training();
  ev.notify_training(g, 10);
  EXPECT_NEAR(ev.exposure(0, 0), 180.0, 1e-9);
  EXPECT_EQ(ev.exposure(0, 1), 0.0);
}

TEST(Surrogate, StateRoundTrip) {
  const auto space = build_default_space();
  auto a = surrogate(space, 1);
  a.notify_training(OperationGraph(space), 77);
  auto b = surrogate(space, 1);
  b.load_state(a.save_state());
  Rng rng(3);
  const auto arch = random_architecture(space, rng);
  EXPECT_DOUBLE_EQ(a.estimate(arch), b.estimate(arch));
}

TEST(Surrogate, RankCorrelationAfterFullSchedule) {
  const auto space = build_default_space();
  auto ev = surrogate(space, 13, 0.01);
  ev.notify_training(OperationGraph(space), 240);
  Rng rng(14), noise_base(15);
  std::vector<double> est, truth;
  for (int i = 0; i < 100; ++i) {
    const auto a = random_architecture(space, rng);
    Rng noise = noise_base.split(i);
    est.push_back(ev.evaluate(a, noise));
    truth.push_back(ev.true_fitness(a));
  }
  EXPECT_GE(spearman(est, truth), 0.8);
}

TEST(Surrogate, MismatchedParamsRejected) {
  const auto params = SurrogateParams::generate(build_default_space(), 1);
  EXPECT_THROW(SurrogateEvaluator(fixtures::twelve_space(), params), ConfigError);
}

TEST(EvaluateBatch, IndependentOfWorkers) {
  const auto space = build_default_space();
  auto ev = surrogate(space, 2, 0.05);
  Rng rng(1);
  std::vector<Architecture> archs;
  for (int i = 0; i < 64; ++i) archs.push_back(random_architecture(space, rng));
  const Rng base(99);
  const auto one = evaluate_batch(ev, archs, base, 10, 1);
  const auto many = evaluate_batch(ev, archs, base, 10, 8);
  EXPECT_EQ(one, many);
  // Slot i uses split(first_index + i).
  Rng s = base.split(15);
  EXPECT_DOUBLE_EQ(one[5], ev.evaluate(archs[5], s));
}

TEST(EvaluateBatch, FailuresBecomeEvaluatorErrors) {
  Failing ev;
  const Rng base(1);
  std::vector<Architecture> ok{Architecture{{{3, 3}}, {16}, ArchMode::supernet}};
  EXPECT_EQ(evaluate_batch(ev, ok, base, 0).at(0), 0.5);
  std::vector<Architecture> throws{Architecture{{{5, 3}}, {16}, ArchMode::supernet}};
  EXPECT_THROW(evaluate_batch(ev, throws, base, 0), EvaluatorError);
  std::vector<Architecture> range{Architecture{{{7, 3}}, {16}, ArchMode::supernet}};
  EXPECT_THROW(evaluate_batch(ev, range, base, 0), EvaluatorError);
}

TEST(TableEvaluator, Lookup) {
  const std::string a = "k3t3|k3t3#c8";
  const std::string b = "k3t6|k3t6#c16";
  TableEvaluator table({{a, 0.7}, {b, 0.5}});
  Rng noise(1);
  EXPECT_EQ(table.evaluate(Architecture::parse(a), noise), 0.7);
  EXPECT_THROW((void)table.evaluate(Architecture::parse("k3t3|k3t6#c8"), noise),
               MissingArchitectureError);
  TableEvaluator fallback({{a, 0.7}}, MissingPolicy::fixed_default, 0.0);
  EXPECT_EQ(fallback.evaluate(Architecture::parse(b), noise), 0.0);
  TableEvaluator nearest({{a, 0.7}, {b, 0.5}}, MissingPolicy::nearest);
  EXPECT_EQ(nearest.evaluate(Architecture::parse("k3t3|k3t6#c8"), noise), 0.7);
  EXPECT_EQ(nearest.evaluate(Architecture::parse("k3t6|k3t6#c8"), noise), 0.5);
  EXPECT_EQ(nearest.evaluate(Architecture::parse("k3t3|k3t6#c16"), noise), 0.5);
  // Two genes from each: the tie goes to the smaller key.
  EXPECT_EQ(nearest.evaluate(Architecture::parse("k5t3|k3t6#c8"), noise), 0.7);
}

TEST(TableEvaluator, ReadsJsonl) {
  std::istringstream in(
      "{\"arch\": \"k3t3|k3t3#c8\", \"top1\": 0.7}\n\n{\"arch\": \"k3t6|k3t6#c8\", \"top1\": 0.6}\n");
  const auto table = TableEvaluator::read_jsonl(in);
  EXPECT_EQ(table.size(), 2u);
  EXPECT_EQ(table.at("k3t6|k3t6#c8"), 0.6);
  std::istringstream bad("{\"arch\": \"k3t3|k3t3#c8\"}\n");
  EXPECT_THROW(TableEvaluator::read_jsonl(bad), ConfigError);
  EXPECT_EQ(parse_missing_policy("nearest"), MissingPolicy::nearest);
  EXPECT_THROW(parse_missing_policy("maybe"), ConfigError);
}

TEST(BruteForce, SeparableTwoByTwo) {
  // 2 layers x 2 ops; fitness separable, so the best is per-layer best.
  const auto space = fixtures::small_space({2}, {3, 5}, {3}, {{16}});
  auto params = SurrogateParams::generate(space, 1, 0.0, 60.0, 0.0);
  params.quality = {std::vector<double>{0.3, 1.0}, std::vector<double>{2.0, -1.0}};
  SurrogateEvaluator ev(space, params);
  ev.notify_training(OperationGraph(space), 1e12);
  const auto best = brute_force_best(space, OperationGraph(space), ev, 100);
  EXPECT_EQ(best.arch.canonical(), "k5t3|k3t3#c16");
  EXPECT_EQ(best.count, 4);
}

TEST(BruteForce, SingletonSpace) {
  const auto space = fixtures::small_space({2}, {3}, {6}, {{16}});
  auto ev = surrogate(space, 1);
  const auto best = brute_force_best(space, OperationGraph(space), ev, 1);
  EXPECT_EQ(best.arch.canonical(), "k3t6|k3t6#c16");
}

TEST(BruteForce, MatchesDoubleEnumeration) {
  const auto space = fixtures::eighty_one_space();
  auto ev = surrogate(space, 17);
  ev.notify_training(OperationGraph(space), 100);
  const auto best = brute_force_best(space, OperationGraph(space), ev, 81);
  EXPECT_EQ(best.count, 81);
  const auto all = fixtures::enumerate_all(space);
  ASSERT_EQ(all.size(), 81u);
  std::string best_key;
  double best_score = -1;
  for (const auto& a : all) {
    const double s = ev.estimate(a);
    const auto key = a.canonical();
    if (s > best_score || (s == best_score && key < best_key)) best_score = s, best_key = key;
  }
  EXPECT_EQ(best.arch.canonical(), best_key);
  EXPECT_DOUBLE_EQ(best.score, best_score);
}

TEST(BruteForce, RefusesLargeSpacesWithCount) {
  const auto space = build_default_space();
  auto ev = surrogate(space, 1);
  try {
    brute_force_best(space, OperationGraph(space), ev, 1000);
    FAIL() << "expected refusal";
  } catch (const SpaceTooLargeError& e) {
    EXPECT_NE(std::string(e.what()).find("444223250467651584"), std::string::npos) << e.what();
  }
}

TEST(BruteForce, VisitsExactlyAliveArchitectures) {
  const auto space = fixtures::small_space({2, 3}, {3, 5}, {3, 6}, {{8, 16}, {16, 24}});
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = fixtures::random_graph(space, rng, 0.5);
    std::uint64_t visited = 0;
    bool all_alive = true;
    std::set<std::string> keys;
    for_each_alive_architecture(g, [&](const Architecture& a) {
      ++visited;
      all_alive = all_alive && g.admits(a);
      keys.insert(a.canonical());
    });
    EXPECT_EQ(BigInt(visited), alive_cardinality(g));
    EXPECT_EQ(keys.size(), visited);
    EXPECT_TRUE(all_alive);
    std::uint64_t direct = 0;
    for (const auto& a : fixtures::enumerate_all(space)) direct += g.admits(a);
    EXPECT_EQ(direct, visited);
  }
}
