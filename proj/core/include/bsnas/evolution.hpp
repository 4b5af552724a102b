#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "bsnas/evaluator.hpp"
#include "bsnas/shrinking.hpp"

namespace bsnas {

struct EvolutionConfig {
  int population = 75;
  int iterations = 20;
  int elite_k = 10;
  double mutation_prob = 0.1;
  int offspring_crossover = 25;
  int offspring_mutation = 25;
  std::optional<std::int64_t> flops_max;  // MACs of the released model
  std::optional<std::int64_t> flops_min;
  int max_resample = 100;
  int hall_of_fame = 10;

  void validate() const;
};

struct Population {
  std::vector<EvalRecord> members;       // sorted, unique
  std::vector<EvalRecord> hall_of_fame;  // best ever, sorted
};

struct IterationStats {
  int iteration = 0;  // 0 is the initial population
  std::size_t evaluated = 0;
  double best = 0.0;
  double mean = 0.0;
  double worst = 0.0;
  double best_ever = 0.0;
  std::string best_ever_arch;
};

struct EvolutionResult {
  EvalRecord best;
  std::vector<IterationStats> history;
  std::uint64_t evaluations = 0;
  Population population;
};

class EvolutionSink {
 public:
  virtual ~EvolutionSink() = default;
  virtual void on_eval(int iteration, int slot, const EvalRecord& record) {
    (void)iteration;
    (void)slot;
    (void)record;
  }
  virtual void on_iteration(const IterationStats& stats) { (void)stats; }
};

/// Gene-wise uniform crossover. A layer gene that would be dead under the
/// child's channel is taken from the parent that carries that channel, so
/// children of alive-respecting parents stay alive-respecting.
Architecture crossover(const Architecture& a, const Architecture& b, Rng& rng,
                       const OperationGraph* graph = nullptr);

/// Resamples each cluster gene over the feasible channels and then each layer
/// gene over the pairs alive under its channel, each with probability `prob`.
/// Layer genes made dead by a channel change are always resampled.
Architecture mutate(const Architecture& arch, const OperationGraph& graph, double prob, Rng& rng);

/// Constrained evolutionary search over the alive part of `graph`.
///
/// Parents are the elite_k best of the current members and the hall of
/// fame. Each generation is rebuilt from crossover children, mutants and
/// random refills; candidates outside the FLOPs window or already evaluated
/// are resampled up to max_resample times. Random draws come from `rng`;
/// evaluation noise for the i-th evaluation from `noise.split(i)`.
class EvolutionarySearch {
 public:
  EvolutionarySearch(const SearchSpace& space, const OperationGraph& graph,
                     EvolutionConfig config, const Evaluator& evaluator, Rng rng, Rng noise,
                     EvolutionSink* sink = nullptr, int workers = 1);

  /// Initial population; throws InfeasibleError when nothing satisfies the
  /// FLOPs window.
  const Population& init_population();
  /// One generation. Returns false when no unseen candidate could be made.
  bool step();
  EvolutionResult run();

  [[nodiscard]] const Population& population() const { return population_; }
  [[nodiscard]] std::uint64_t evaluations() const { return evaluations_; }
  [[nodiscard]] bool within_window(const Architecture& arch) const;

 private:
  enum class Source { crossover, mutation, random };

  std::optional<Architecture> propose(Source source, const std::vector<EvalRecord>& parents,
                                      std::unordered_set<std::string>& generation);
  [[nodiscard]] std::int64_t window_gap(const Architecture& arch) const;
  std::vector<EvalRecord> evaluate(std::vector<Architecture> candidates, int iteration);
  void absorb(std::vector<EvalRecord> records, int iteration);

  const SearchSpace& space_;
  const OperationGraph& graph_;
  EvolutionConfig config_;
  const Evaluator& evaluator_;
  Rng rng_;
  Rng noise_;
  EvolutionSink* sink_;
  int workers_;

  Population population_;
  std::vector<IterationStats> history_;
  std::unordered_set<std::string> seen_;
  std::uint64_t evaluations_ = 0;
  int iteration_ = 0;
  std::int64_t nearest_gap_ = -1;  // smallest distance to the window seen
};

/// Convenience wrappers around EvolutionarySearch.
Population init_population(const SearchSpace& space, const OperationGraph& graph,
                           const EvolutionConfig& config, const Evaluator& evaluator, Rng rng,
                           Rng noise);
EvolutionResult evolve(const SearchSpace& space, const OperationGraph& graph,
                       const EvolutionConfig& config, const Evaluator& evaluator, Rng rng,
                       Rng noise, EvolutionSink* sink = nullptr, int workers = 1);

}  // namespace bsnas
