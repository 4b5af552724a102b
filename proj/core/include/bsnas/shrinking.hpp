#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bsnas/evaluator.hpp"
#include "bsnas/operation_graph.hpp"

namespace bsnas {

struct ShrinkSchedule {
  int t_first = 120;     // virtual epochs before the first scoring round
  int t_interval = 40;   // virtual epochs between rounds
  std::vector<int> retention{18, 9, 5, 3};  // N_r per round
  int test_factor = 200;  // M

  /// Throws ConfigError unless retention is positive and strictly decreasing.
  void validate() const;
  [[nodiscard]] int rounds() const { return static_cast<int>(retention.size()); }
  [[nodiscard]] int batch_size(int round) const { return retention.at(round) * test_factor; }
};

struct EvalRecord {
  Architecture arch;
  double score = 0.0;
  int rank = 0;
  std::string key;  // canonical string, cached for ordering
};

EvalRecord make_record(Architecture arch, double score);

/// Orders by score descending, canonical key ascending; assigns ranks 1..n.
void sort_records(std::vector<EvalRecord>& records);

/// Retention score R = (top - bottom) / total, kept as exact counts.
/// total == 0 stands for the never-sampled sentinel, ordered below every
/// finite value.
struct OpScore {
  int top = 0;
  int bottom = 0;
  int total = 0;

  [[nodiscard]] bool sampled() const { return total > 0; }
  [[nodiscard]] bool positive() const { return sampled() && top > bottom; }
  /// -infinity for unsampled ops.
  [[nodiscard]] double value() const;

  /// Exact comparison of the ratios.
  friend std::strong_ordering compare_ratio(const OpScore& a, const OpScore& b);
  friend bool operator==(const OpScore&, const OpScore&) = default;
};

/// scores[layer][op] is set for alive triples only.
using OperationScores = std::vector<std::vector<std::optional<OpScore>>>;

/// Fair batch of `n_r * test_factor` architectures. Per cluster the feasible
/// channels are dealt over the slots by a shuffled cycle; then per layer,
/// within each channel's slot group, the alive (k, t) pairs are dealt the
/// same way. Every count at both stages differs by at most one.
std::vector<Architecture> fair_batch(const OperationGraph& graph, int n_r, int test_factor,
                                     Rng& rng);

/// `count` slots dealt over `items` items: a shuffled item order repeated
/// cyclically, then the slots themselves shuffled.
std::vector<int> balanced_assignment(int count, int items, Rng& rng);

/// Retention scores over the top and bottom floor(n/3) records of
/// a batch sorted by score descending. Throws ContractViolation for fewer
/// than three records, unsorted input, or architectures the graph rejects.
OperationScores score_operations(const OperationGraph& graph,
                                 const std::vector<EvalRecord>& sorted_batch);

struct OpDecision {
  Op op;
  OpScore score;
  bool kept = false;
  bool reinstated = false;  // brought back by the feasibility closure
};

struct LayerReport {
  int layer = 0;
  std::vector<OpDecision> ops;  // previously alive ops, best R first
  bool fallback = false;        // no positive R; the top op was kept
  bool closure_fired = false;   // feasibility closure changed this layer
};

struct ShrinkReport {
  int step = 0;
  int n_r = 0;
  int batch_size = 0;
  std::vector<LayerReport> layers;
  std::vector<std::vector<int>> feasible_channels;  // per cluster, after the step
};

struct ShrinkOutcome {
  OperationGraph graph;
  ShrinkReport report;
};

/// Keeps, per layer, the best min(n_r, #positive R) alive ops (one op when
/// none is positive), then turns off ops whose channel lost cluster-wide
/// feasibility. A cluster left without any feasible channel is repaired by
/// picking the channel with the best summed per-layer rank and reinstating
/// each layer's best op under it.
ShrinkOutcome shrink_step(const OperationGraph& graph, const OperationScores& scores, int n_r);

/// Receives the event stream of run_shrinking.
class ShrinkSink {
 public:
  virtual ~ShrinkSink() = default;
  virtual void on_eval(int step, int slot, const EvalRecord& record) {
    (void)step;
    (void)slot;
    (void)record;
  }
  virtual void on_report(const ShrinkReport& report) { (void)report; }
};

/// Resumable position inside the schedule.
struct ShrinkState {
  OperationGraph graph;
  int round = 0;  // next round to run
  Rng sampling;
  Rng noise;  // base of the per-evaluation noise streams
  std::uint64_t evaluations = 0;

  static ShrinkState fresh(const SearchSpace& space, std::uint64_t seed);
};

struct ShrinkResult {
  OperationGraph graph;
  std::vector<ShrinkReport> reports;
};

/// Runs the remaining rounds. Round r first notifies the evaluator of
/// t_first (r = 0) or t_interval epochs on the current graph, then samples a
/// fair batch, evaluates, sorts, scores and shrinks. `after_round` sees the
/// updated state and evaluator, e.g. to checkpoint.
ShrinkResult run_shrinking(const SearchSpace& space, const ShrinkSchedule& schedule,
                           Evaluator& evaluator, ShrinkState& state, ShrinkSink* sink = nullptr,
                           int workers = 1,
                           const std::function<void(const ShrinkState&)>& after_round = {});

}  // namespace bsnas
