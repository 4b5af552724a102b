#include "bsnas/brute_force.hpp"

#include "bsnas/errors.hpp"

namespace bsnas {

namespace {

struct Enumerator {
  const OperationGraph& graph;
  const std::function<void(const Architecture&)>& visit;
  Architecture arch;

  void cluster(int c) {
    if (c == graph.cluster_count()) {
      visit(arch);
      return;
    }
    for (int channel : graph.feasible_channels(c)) {
      arch.cluster_genes[c] = channel;
      layers(c, 0, channel);
    }
  }

  void layers(int c, std::size_t position, int channel) {
    const auto& members = graph.cluster_layers(c);
    if (position == members.size()) {
      cluster(c + 1);
      return;
    }
    const int layer = members[position];
    for (const auto& pair : graph.alive_pairs(layer, channel)) {
      arch.layer_genes[layer] = pair;
      layers(c, position + 1, channel);
    }
  }
};

}  // namespace

void for_each_alive_architecture(const OperationGraph& graph,
                                 const std::function<void(const Architecture&)>& visit) {
  Enumerator e{graph, visit, {}};
  e.arch.layer_genes.resize(graph.layer_count());
  e.arch.cluster_genes.resize(graph.cluster_count());
  e.cluster(0);
}

BruteForceResult brute_force_best(const SearchSpace& space, const OperationGraph& graph,
                                  const Evaluator& evaluator, std::uint64_t limit,
                                  std::uint64_t noise_seed) {
  const BigInt count = alive_cardinality(graph);
  if (count > limit) {
    throw SpaceTooLargeError("alive space holds " + count.str() +
                             " architectures, over the limit of " + std::to_string(limit));
  }
  if (count == 0) throw InfeasibleError("alive space is empty");

  const Rng noise = Rng::stream(noise_seed, "oracle-noise");
  BruteForceResult best;
  best.count = count;
  bool have = false;
  std::string best_key;
  std::uint64_t index = 0;
  for_each_alive_architecture(graph, [&](const Architecture& arch) {
    require_valid(space, arch);
    Rng slot = noise.split(index++);
    const double score = evaluator.evaluate(arch, slot);
    if (!have || score > best.score) {
      best.arch = arch;
      best.score = score;
      best_key = arch.canonical();
      have = true;
    } else if (score == best.score) {
      auto key = arch.canonical();
      if (key < best_key) {
        best.arch = arch;
        best_key = std::move(key);
      }
    }
  });
  return best;
}

}  // namespace bsnas
