#include "bsnas/shrinking.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "bsnas/errors.hpp"

namespace bsnas {

void ShrinkSchedule::validate() const {
  if (t_first < 0 || t_interval < 0) throw ConfigError("schedule epochs must be non-negative");
  if (test_factor < 1) throw ConfigError("test_factor must be >= 1");
  if (retention.empty()) throw ConfigError("retention schedule is empty");
  for (std::size_t i = 0; i < retention.size(); ++i) {
    if (retention[i] < 1) throw ConfigError("retention values must be positive");
    if (i > 0 && retention[i] >= retention[i - 1]) {
      throw ConfigError("retention values must be strictly decreasing");
    }
  }
}

EvalRecord make_record(Architecture arch, double score) {
  EvalRecord record;
  record.key = arch.canonical();
  record.arch = std::move(arch);
  record.score = score;
  return record;
}

void sort_records(std::vector<EvalRecord>& records) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  for (std::size_t i = 0; i < records.size(); ++i) records[i].rank = static_cast<int>(i) + 1;
}

double OpScore::value() const {
  if (!sampled()) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(top - bottom) / static_cast<double>(total);
}

std::strong_ordering compare_ratio(const OpScore& a, const OpScore& b) {
  if (!a.sampled() || !b.sampled()) return a.sampled() <=> b.sampled();
  const auto lhs = static_cast<long long>(a.top - a.bottom) * b.total;
  const auto rhs = static_cast<long long>(b.top - b.bottom) * a.total;
  return lhs <=> rhs;
}

std::vector<int> balanced_assignment(int count, int items, Rng& rng) {
  if (count < 0 || items < 1) throw ContractViolation("balanced_assignment needs items >= 1");
  std::vector<int> order(static_cast<std::size_t>(items));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  std::vector<int> slots(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) slots[i] = order[i % items];
  rng.shuffle(std::span<int>(slots));
  return slots;
}

std::vector<Architecture> fair_batch(const OperationGraph& graph, int n_r, int test_factor,
                                     Rng& rng) {
  if (n_r < 1 || test_factor < 1) throw ContractViolation("fair_batch needs n_r, M >= 1");
  graph.check_feasible();
  const int batch = n_r * test_factor;
  std::vector<Architecture> archs(static_cast<std::size_t>(batch));
  for (auto& arch : archs) {
    arch.layer_genes.resize(graph.layer_count());
    arch.cluster_genes.resize(graph.cluster_count());
  }

  for (int c = 0; c < graph.cluster_count(); ++c) {
    const auto feasible = graph.feasible_channels(c);
    const auto channel_of_slot = balanced_assignment(batch, static_cast<int>(feasible.size()), rng);
    std::vector<std::vector<int>> groups(feasible.size());
    for (int slot = 0; slot < batch; ++slot) {
      archs[slot].cluster_genes[c] = feasible[channel_of_slot[slot]];
      groups[channel_of_slot[slot]].push_back(slot);
    }
    for (int layer : graph.cluster_layers(c)) {
      for (std::size_t f = 0; f < feasible.size(); ++f) {
        const auto pairs = graph.alive_pairs(layer, feasible[f]);
        const auto pair_of_slot =
            balanced_assignment(static_cast<int>(groups[f].size()), static_cast<int>(pairs.size()),
                                rng);
        for (std::size_t i = 0; i < groups[f].size(); ++i) {
          archs[groups[f][i]].layer_genes[layer] = pairs[pair_of_slot[i]];
        }
      }
    }
  }
  return archs;
}

OperationScores score_operations(const OperationGraph& graph,
                                 const std::vector<EvalRecord>& sorted_batch) {
  const int n = static_cast<int>(sorted_batch.size());
  if (n < 3) throw ContractViolation("score_operations needs at least 3 records");
  for (int i = 1; i < n; ++i) {
    if (sorted_batch[i].score > sorted_batch[i - 1].score) {
      throw ContractViolation("score_operations needs a batch sorted by score, descending");
    }
  }

  OperationScores scores(static_cast<std::size_t>(graph.layer_count()));
  for (int l = 0; l < graph.layer_count(); ++l) {
    scores[l].resize(static_cast<std::size_t>(graph.op_count(l)));
    for (int op : graph.alive_ops(l)) scores[l][op] = OpScore{};
  }

  const int third = n / 3;
  for (int i = 0; i < n; ++i) {
    const auto& arch = sorted_batch[i].arch;
    if (arch.layer_genes.size() != static_cast<std::size_t>(graph.layer_count()) ||
        arch.cluster_genes.size() != static_cast<std::size_t>(graph.cluster_count())) {
      throw ContractViolation("batch architecture does not match the graph: " + arch.canonical());
    }
    for (int l = 0; l < graph.layer_count(); ++l) {
      const auto& gene = arch.layer_genes[l];
      const int op =
          graph.op_index(l, Op{gene.kernel, gene.expansion, arch.cluster_genes[graph.cluster_of(l)]});
      if (op < 0 || !scores[l][op]) {
        throw ContractViolation("batch uses a dead operation at layer " + std::to_string(l + 1) +
                                ": " + arch.canonical());
      }
      auto& s = *scores[l][op];
      ++s.total;
      if (i < third) ++s.top;
      if (i >= n - third) ++s.bottom;
    }
  }
  return scores;
}

ShrinkOutcome shrink_step(const OperationGraph& graph, const OperationScores& scores, int n_r) {
  if (n_r < 1) throw ContractViolation("retention target must be >= 1");
  if (scores.size() != static_cast<std::size_t>(graph.layer_count())) {
    throw ContractViolation("scores do not cover every layer");
  }
  graph.check_feasible();

  ShrinkOutcome out{graph, {}};
  out.graph.set_step_index(graph.step_index() + 1);
  auto& report = out.report;
  report.n_r = n_r;

  // Per-layer ranking and retention.
  std::vector<std::vector<char>> kept(static_cast<std::size_t>(graph.layer_count()));
  for (int l = 0; l < graph.layer_count(); ++l) {
    if (scores[l].size() != static_cast<std::size_t>(graph.op_count(l))) {
      throw ContractViolation("scores do not match layer " + std::to_string(l + 1));
    }
    LayerReport layer_report;
    layer_report.layer = l;
    std::vector<int> alive;
    for (int op = 0; op < graph.op_count(l); ++op) {
      if (graph.alive(l, op) != scores[l][op].has_value()) {
        throw ContractViolation("scores must cover exactly the alive operations (layer " +
                                std::to_string(l + 1) + ")");
      }
      if (graph.alive(l, op)) alive.push_back(op);
    }
    std::stable_sort(alive.begin(), alive.end(), [&](int a, int b) {
      return compare_ratio(*scores[l][a], *scores[l][b]) == std::strong_ordering::greater;
    });
    const int positives = static_cast<int>(std::count_if(
        alive.begin(), alive.end(), [&](int op) { return scores[l][op]->positive(); }));
    const int keep = positives > 0 ? std::min(n_r, positives) : 1;
    layer_report.fallback = positives == 0;
    kept[l].assign(static_cast<std::size_t>(graph.op_count(l)), 0);
    for (int i = 0; i < static_cast<int>(alive.size()); ++i) {
      if (i < keep) kept[l][alive[i]] = 1;
      layer_report.ops.push_back({graph.ops(l)[alive[i]], *scores[l][alive[i]], i < keep, false});
    }
    report.layers.push_back(std::move(layer_report));
  }

  // Cluster-feasibility closure.
  for (int c = 0; c < graph.cluster_count(); ++c) {
    const auto& layers = graph.cluster_layers(c);
    auto kept_with = [&](int layer, int channel) {
      for (int op = 0; op < graph.op_count(layer); ++op) {
        if (kept[layer][op] && graph.ops(layer)[op].channel == channel) return true;
      }
      return false;
    };
    std::vector<int> feasible;
    for (int channel : graph.cluster_channels(c)) {
      if (std::all_of(layers.begin(), layers.end(),
                      [&](int layer) { return kept_with(layer, channel); })) {
        feasible.push_back(channel);
      }
    }

    bool rescue = false;
    if (feasible.empty()) {
      // Channel whose best op sits highest, summed over the cluster's layers.
      int best_channel = -1;
      long long best_sum = std::numeric_limits<long long>::max();
      for (int channel : graph.feasible_channels(c)) {
        long long sum = 0;
        for (int layer : layers) {
          const auto& ranked = report.layers[layer].ops;
          const auto it = std::find_if(ranked.begin(), ranked.end(), [&](const OpDecision& d) {
            return d.op.channel == channel;
          });
          sum += it - ranked.begin();
        }
        if (sum < best_sum) {
          best_sum = sum;
          best_channel = channel;
        }
      }
      feasible.push_back(best_channel);
      rescue = true;
    }

    for (int layer : layers) {
      auto& layer_report = report.layers[layer];
      bool has_kept = false;
      for (auto& decision : layer_report.ops) {
        if (!decision.kept) continue;
        if (std::find(feasible.begin(), feasible.end(), decision.op.channel) == feasible.end()) {
          decision.kept = false;
          layer_report.closure_fired = true;
        } else {
          has_kept = true;
        }
      }
      if (!has_kept && rescue) {
        for (auto& decision : layer_report.ops) {
          if (decision.op.channel == feasible.front()) {
            decision.kept = true;
            decision.reinstated = true;
            layer_report.closure_fired = true;
            break;
          }
        }
      }
    }
  }

  for (int l = 0; l < graph.layer_count(); ++l) {
    for (const auto& decision : report.layers[l].ops) {
      out.graph.set_alive(l, graph.op_index(l, decision.op), decision.kept);
    }
  }
  out.graph.check_feasible();
  for (int c = 0; c < graph.cluster_count(); ++c) {
    report.feasible_channels.push_back(out.graph.feasible_channels(c));
  }
  return out;
}

ShrinkState ShrinkState::fresh(const SearchSpace& space, std::uint64_t seed) {
  ShrinkState state;
  state.graph = OperationGraph(space);
  state.sampling = Rng::stream(seed, "sampling");
  state.noise = Rng::stream(seed, "shrink-noise");
  return state;
}

ShrinkResult run_shrinking(const SearchSpace& space, const ShrinkSchedule& schedule,
                           Evaluator& evaluator, ShrinkState& state, ShrinkSink* sink, int workers,
                           const std::function<void(const ShrinkState&)>& after_round) {
  schedule.validate();
  if (state.graph.layer_count() != space.layer_count()) {
    throw ContractViolation("shrink state does not match the search space");
  }
  ShrinkResult result;
  for (; state.round < schedule.rounds(); ) {
    const int round = state.round;
    evaluator.notify_training(state.graph, round == 0 ? schedule.t_first : schedule.t_interval);

    const int n_r = schedule.retention[round];
    auto batch = fair_batch(state.graph, n_r, schedule.test_factor, state.sampling);
    for (const auto& arch : batch) {
      for (int l = 0; l < space.layer_count(); ++l) {
        state.graph.add_usage(l, space.op_index(l, space.op_of(arch, l)));
      }
    }

    const auto scores = evaluate_batch(evaluator, batch, state.noise, state.evaluations, workers);
    state.evaluations += batch.size();

    std::vector<EvalRecord> records;
    records.reserve(batch.size());
    for (std::size_t slot = 0; slot < batch.size(); ++slot) {
      records.push_back(make_record(std::move(batch[slot]), scores[slot]));
      if (sink) sink->on_eval(round, static_cast<int>(slot), records.back());
    }
    sort_records(records);

    auto outcome = shrink_step(state.graph, score_operations(state.graph, records), n_r);
    outcome.report.step = round;
    outcome.report.batch_size = static_cast<int>(records.size());
    if (sink) sink->on_report(outcome.report);
    result.reports.push_back(outcome.report);

    state.graph = std::move(outcome.graph);
    state.round = round + 1;
    if (after_round) after_round(state);
  }
  result.graph = state.graph;
  return result;
}

}  // namespace bsnas
