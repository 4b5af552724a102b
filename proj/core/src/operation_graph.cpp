#include "bsnas/operation_graph.hpp"

#include <algorithm>

#include "bsnas/errors.hpp"

namespace bsnas {

OperationGraph::OperationGraph(const SearchSpace& space) {
  for (int l = 0; l < space.layer_count(); ++l) {
    ops_.push_back(space.layer_ops(l));
    layer_cluster_.push_back(space.cluster_of(l));
    alive_.emplace_back(ops_.back().size(), 1);
    usage_.emplace_back(ops_.back().size(), 0);
  }
  for (int c = 0; c < space.cluster_count(); ++c) {
    cluster_channels_.push_back(space.clusters()[c].choices.channel_choices);
    std::vector<int> layers;
    for (int l = 0; l < space.layer_count(); ++l) {
      if (space.cluster_of(l) == c) layers.push_back(l);
    }
    cluster_layers_.push_back(std::move(layers));
  }
}

int OperationGraph::op_index(int layer, const Op& op) const {
  const auto& ops = ops_.at(layer);
  const auto it = std::lower_bound(ops.begin(), ops.end(), op);
  return (it != ops.end() && *it == op) ? static_cast<int>(it - ops.begin()) : -1;
}

bool OperationGraph::alive(int layer, const Op& op) const {
  const int index = op_index(layer, op);
  return index >= 0 && alive(layer, index);
}

int OperationGraph::alive_count(int layer) const {
  return static_cast<int>(std::count(alive_.at(layer).begin(), alive_.at(layer).end(), 1));
}

std::vector<int> OperationGraph::alive_ops(int layer) const {
  std::vector<int> out;
  for (int i = 0; i < op_count(layer); ++i) {
    if (alive(layer, i)) out.push_back(i);
  }
  return out;
}

std::vector<int> OperationGraph::feasible_channels(int cluster) const {
  std::vector<int> feasible;
  for (int channel : cluster_channels_.at(cluster)) {
    const bool everywhere = std::all_of(
        cluster_layers_[cluster].begin(), cluster_layers_[cluster].end(), [&](int layer) {
          for (int i = 0; i < op_count(layer); ++i) {
            if (alive(layer, i) && ops_[layer][i].channel == channel) return true;
          }
          return false;
        });
    if (everywhere) feasible.push_back(channel);
  }
  return feasible;
}

std::vector<LayerGene> OperationGraph::alive_pairs(int layer, int channel) const {
  std::vector<LayerGene> pairs;
  for (int i = 0; i < op_count(layer); ++i) {
    if (alive(layer, i) && ops_[layer][i].channel == channel) pairs.push_back(ops_[layer][i].gene());
  }
  return pairs;
}

bool OperationGraph::admits(const Architecture& arch) const {
  if (arch.layer_genes.size() != ops_.size() ||
      arch.cluster_genes.size() != cluster_layers_.size()) {
    return false;
  }
  for (int l = 0; l < layer_count(); ++l) {
    const auto& gene = arch.layer_genes[l];
    if (!alive(l, Op{gene.kernel, gene.expansion, arch.cluster_genes[cluster_of(l)]})) return false;
  }
  return true;
}

void OperationGraph::check_feasible() const {
  for (int l = 0; l < layer_count(); ++l) {
    if (alive_count(l) == 0) {
      throw InfeasibleError("layer " + std::to_string(l + 1) + " has no alive operation");
    }
  }
  for (int c = 0; c < cluster_count(); ++c) {
    if (feasible_channels(c).empty()) {
      throw InfeasibleError("cluster " + std::to_string(c + 1) + " has no feasible channel");
    }
  }
}

bool OperationGraph::subset_of(const OperationGraph& other) const {
  if (other.ops_ != ops_) return false;
  for (int l = 0; l < layer_count(); ++l) {
    for (int i = 0; i < op_count(l); ++i) {
      if (alive(l, i) && !other.alive(l, i)) return false;
    }
  }
  return true;
}

BigInt alive_cardinality(const OperationGraph& graph) {
  BigInt total = 1;
  for (int c = 0; c < graph.cluster_count(); ++c) {
    BigInt per_cluster = 0;
    for (int channel : graph.feasible_channels(c)) {
      BigInt combos = 1;
      for (int layer : graph.cluster_layers(c)) {
        combos *= static_cast<unsigned>(graph.alive_pairs(layer, channel).size());
      }
      per_cluster += combos;
    }
    total *= per_cluster;
  }
  return total;
}

}  // namespace bsnas
