#include "bsnas/evolution.hpp"

#include <algorithm>

#include "bsnas/cost_model.hpp"
#include "bsnas/errors.hpp"
#include "bsnas/stats.hpp"

namespace bsnas {

void EvolutionConfig::validate() const {
  if (population < 1) throw ConfigError("population must be positive");
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (elite_k < 1 || elite_k > population) throw ConfigError("elite_k must be in [1, population]");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) {
    throw ConfigError("mutation_prob must be in [0, 1]");
  }
  if (offspring_crossover < 0 || offspring_mutation < 0 ||
      offspring_crossover + offspring_mutation > population) {
    throw ConfigError("offspring counts must be non-negative and fit in the population");
  }
  if (flops_min && flops_max && *flops_min > *flops_max) {
    throw ConfigError("flops_min exceeds flops_max");
  }
  if (max_resample < 1) throw ConfigError("max_resample must be positive");
  if (hall_of_fame < 1) throw ConfigError("hall_of_fame must be positive");
}

Architecture crossover(const Architecture& a, const Architecture& b, Rng& rng,
                       const OperationGraph* graph) {
  Architecture child = a;
  for (std::size_t c = 0; c < child.cluster_genes.size(); ++c) {
    child.cluster_genes[c] = rng.coin() ? a.cluster_genes[c] : b.cluster_genes[c];
  }
  for (std::size_t l = 0; l < child.layer_genes.size(); ++l) {
    const auto& gene = rng.coin() ? a.layer_genes[l] : b.layer_genes[l];
    child.layer_genes[l] = gene;
    if (graph == nullptr) continue;
    const int cluster = graph->cluster_of(static_cast<int>(l));
    const int channel = child.cluster_genes[cluster];
    if (!graph->alive(static_cast<int>(l), Op{gene.kernel, gene.expansion, channel})) {
      child.layer_genes[l] =
          a.cluster_genes[cluster] == channel ? a.layer_genes[l] : b.layer_genes[l];
    }
  }
  return child;
}

Architecture mutate(const Architecture& arch, const OperationGraph& graph, double prob, Rng& rng) {
  Architecture child = arch;
  for (int c = 0; c < graph.cluster_count(); ++c) {
    if (rng.uniform() < prob) {
      const auto feasible = graph.feasible_channels(c);
      child.cluster_genes[c] = feasible[rng.below(feasible.size())];
    }
  }
  for (int l = 0; l < graph.layer_count(); ++l) {
    const int channel = child.cluster_genes[graph.cluster_of(l)];
    const auto pairs = graph.alive_pairs(l, channel);
    const bool resample = rng.uniform() < prob;
    const bool dead = std::find(pairs.begin(), pairs.end(), child.layer_genes[l]) == pairs.end();
    if (resample || dead) child.layer_genes[l] = pairs[rng.below(pairs.size())];
  }
  return child;
}

EvolutionarySearch::EvolutionarySearch(const SearchSpace& space, const OperationGraph& graph,
                                       EvolutionConfig config, const Evaluator& evaluator, Rng rng,
                                       Rng noise, EvolutionSink* sink, int workers)
    : space_(space),
      graph_(graph),
      config_(config),
      evaluator_(evaluator),
      rng_(rng),
      noise_(noise),
      sink_(sink),
      workers_(workers) {
  config_.validate();
  graph_.check_feasible();
}

bool EvolutionarySearch::within_window(const Architecture& arch) const {
  return window_gap(arch) == 0;
}

std::int64_t EvolutionarySearch::window_gap(const Architecture& arch) const {
  Architecture released = arch;
  released.mode = ArchMode::released;
  const auto macs = flops(space_, released).total_macs;
  if (config_.flops_max && macs > *config_.flops_max) return macs - *config_.flops_max;
  if (config_.flops_min && macs < *config_.flops_min) return *config_.flops_min - macs;
  return 0;
}

std::optional<Architecture> EvolutionarySearch::propose(
    Source source, const std::vector<EvalRecord>& parents,
    std::unordered_set<std::string>& generation) {
  for (int attempt = 0; attempt < config_.max_resample; ++attempt) {
    Architecture candidate;
    switch (source) {
      case Source::crossover: {
        const auto n = parents.size();
        const auto i = rng_.below(n);
        auto j = i;
        if (n > 1) {
          j = rng_.below(n - 1);
          if (j >= i) ++j;
        }
        candidate = crossover(parents[i].arch, parents[j].arch, rng_, &graph_);
        break;
      }
      case Source::mutation:
        candidate = mutate(parents[rng_.below(parents.size())].arch, graph_,
                           config_.mutation_prob, rng_);
        break;
      case Source::random:
        candidate = random_architecture(space_, rng_, &graph_);
        break;
    }
    auto key = candidate.canonical();
    if (seen_.contains(key) || generation.contains(key)) continue;
    if (const auto gap = window_gap(candidate); gap > 0) {
      if (nearest_gap_ < 0 || gap < nearest_gap_) nearest_gap_ = gap;
      continue;
    }
    generation.insert(std::move(key));
    return candidate;
  }
  return std::nullopt;
}

std::vector<EvalRecord> EvolutionarySearch::evaluate(std::vector<Architecture> candidates,
                                                     int iteration) {
  const auto scores = evaluate_batch(evaluator_, candidates, noise_, evaluations_, workers_);
  evaluations_ += candidates.size();
  std::vector<EvalRecord> records;
  records.reserve(candidates.size());
  for (std::size_t slot = 0; slot < candidates.size(); ++slot) {
    records.push_back(make_record(std::move(candidates[slot]), scores[slot]));
    seen_.insert(records.back().key);
    if (sink_) sink_->on_eval(iteration, static_cast<int>(slot), records.back());
  }
  return records;
}

void EvolutionarySearch::absorb(std::vector<EvalRecord> records, int iteration) {
  IterationStats stats;
  stats.iteration = iteration;
  stats.evaluated = records.size();
  if (!records.empty()) {
    sort_records(records);
    std::vector<double> scores;
    for (const auto& r : records) scores.push_back(r.score);
    stats.best = records.front().score;
    stats.worst = records.back().score;
    stats.mean = mean(scores);

    auto& hof = population_.hall_of_fame;
    hof.insert(hof.end(), records.begin(), records.end());
    sort_records(hof);
    if (hof.size() > static_cast<std::size_t>(config_.hall_of_fame)) {
      hof.resize(static_cast<std::size_t>(config_.hall_of_fame));
    }
    population_.members = std::move(records);
  }
  if (!population_.hall_of_fame.empty()) {
    stats.best_ever = population_.hall_of_fame.front().score;
    stats.best_ever_arch = population_.hall_of_fame.front().key;
  }
  history_.push_back(stats);
  if (sink_) sink_->on_iteration(stats);
}

const Population& EvolutionarySearch::init_population() {
  std::unordered_set<std::string> generation;
  std::vector<Architecture> candidates;
  for (int slot = 0; slot < config_.population; ++slot) {
    auto candidate = propose(Source::random, {}, generation);
    if (!candidate) break;
    candidates.push_back(std::move(*candidate));
  }
  if (candidates.empty()) {
    std::string message = "no alive architecture satisfies the FLOPs window";
    if (nearest_gap_ >= 0) {
      message += "; closest candidate missed it by " + std::to_string(nearest_gap_) + " MACs";
    }
    throw InfeasibleError(message);
  }
  iteration_ = 0;
  absorb(evaluate(std::move(candidates), 0), 0);
  return population_;
}

bool EvolutionarySearch::step() {
  ++iteration_;
  std::vector<EvalRecord> parents = population_.members;
  for (const auto& record : population_.hall_of_fame) {
    const bool present = std::any_of(parents.begin(), parents.end(),
                                     [&](const EvalRecord& p) { return p.key == record.key; });
    if (!present) parents.push_back(record);
  }
  sort_records(parents);
  if (parents.size() > static_cast<std::size_t>(config_.elite_k)) {
    parents.resize(static_cast<std::size_t>(config_.elite_k));
  }

  std::unordered_set<std::string> generation;
  std::vector<Architecture> candidates;
  if (!parents.empty()) {
    for (int i = 0; i < config_.offspring_crossover; ++i) {
      if (auto c = propose(Source::crossover, parents, generation)) candidates.push_back(std::move(*c));
    }
    for (int i = 0; i < config_.offspring_mutation; ++i) {
      if (auto c = propose(Source::mutation, parents, generation)) candidates.push_back(std::move(*c));
    }
  }
  while (candidates.size() < static_cast<std::size_t>(config_.population)) {
    auto c = propose(Source::random, parents, generation);
    if (!c) break;
    candidates.push_back(std::move(*c));
  }

  if (candidates.empty()) {
    absorb({}, iteration_);
    return false;
  }
  absorb(evaluate(std::move(candidates), iteration_), iteration_);
  return true;
}

EvolutionResult EvolutionarySearch::run() {
  init_population();
  for (int i = 0; i < config_.iterations; ++i) step();
  EvolutionResult result;
  result.best = population_.hall_of_fame.front();
  result.history = history_;
  result.evaluations = evaluations_;
  result.population = population_;
  return result;
}

Population init_population(const SearchSpace& space, const OperationGraph& graph,
                           const EvolutionConfig& config, const Evaluator& evaluator, Rng rng,
                           Rng noise) {
  EvolutionarySearch search(space, graph, config, evaluator, rng, noise);
  return search.init_population();
}

EvolutionResult evolve(const SearchSpace& space, const OperationGraph& graph,
                       const EvolutionConfig& config, const Evaluator& evaluator, Rng rng,
                       Rng noise, EvolutionSink* sink, int workers) {
  EvolutionarySearch search(space, graph, config, evaluator, rng, noise, sink, workers);
  return search.run();
}

}  // namespace bsnas
