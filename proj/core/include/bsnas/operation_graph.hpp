#pragma once

#include <cstdint>
#include <vector>

#include "bsnas/search_space.hpp"

namespace bsnas {

/// Liveness graph over the supernet: H layers times O_N operation triples,
/// with per-triple usage counters. A fresh graph has every triple alive.
///
/// A channel is feasible for a cluster when every layer of the cluster still
/// has at least one alive triple carrying that channel.
class OperationGraph {
 public:
  OperationGraph() = default;
  explicit OperationGraph(const SearchSpace& space);

  [[nodiscard]] int layer_count() const { return static_cast<int>(ops_.size()); }
  [[nodiscard]] int op_count(int layer) const { return static_cast<int>(ops_.at(layer).size()); }
  [[nodiscard]] const std::vector<Op>& ops(int layer) const { return ops_.at(layer); }
  [[nodiscard]] int cluster_of(int layer) const { return layer_cluster_.at(layer); }
  [[nodiscard]] int cluster_count() const { return static_cast<int>(cluster_layers_.size()); }
  [[nodiscard]] const std::vector<int>& cluster_layers(int cluster) const {
    return cluster_layers_.at(cluster);
  }
  [[nodiscard]] const std::vector<int>& cluster_channels(int cluster) const {
    return cluster_channels_.at(cluster);
  }
  [[nodiscard]] int op_index(int layer, const Op& op) const;

  [[nodiscard]] bool alive(int layer, int op) const { return alive_.at(layer).at(op) != 0; }
  [[nodiscard]] bool alive(int layer, const Op& op) const;
  void set_alive(int layer, int op, bool value) { alive_.at(layer).at(op) = value ? 1 : 0; }
  [[nodiscard]] int alive_count(int layer) const;
  [[nodiscard]] std::vector<int> alive_ops(int layer) const;

  [[nodiscard]] std::uint64_t usage(int layer, int op) const { return usage_.at(layer).at(op); }
  void add_usage(int layer, int op, std::uint64_t n = 1) { usage_.at(layer).at(op) += n; }

  [[nodiscard]] int step_index() const { return step_index_; }
  void set_step_index(int step) { step_index_ = step; }

  /// Channels of `cluster` with an alive triple in every layer, ascending.
  [[nodiscard]] std::vector<int> feasible_channels(int cluster) const;
  /// (k, t) pairs alive at `layer` under `channel`, canonical order.
  [[nodiscard]] std::vector<LayerGene> alive_pairs(int layer, int channel) const;
  /// True when every gene of `arch` is an alive triple.
  [[nodiscard]] bool admits(const Architecture& arch) const;

  /// Throws InfeasibleError naming the first empty layer or cluster.
  void check_feasible() const;
  /// Every alive triple of this graph is alive in `other`.
  [[nodiscard]] bool subset_of(const OperationGraph& other) const;

  friend bool operator==(const OperationGraph&, const OperationGraph&) = default;

 private:
  std::vector<std::vector<Op>> ops_;
  std::vector<int> layer_cluster_;
  std::vector<std::vector<int>> cluster_layers_;
  std::vector<std::vector<int>> cluster_channels_;
  std::vector<std::vector<char>> alive_;
  std::vector<std::vector<std::uint64_t>> usage_;
  int step_index_ = 0;
};

/// Number of alive-respecting architectures:
/// prod over clusters of sum over feasible c of prod over layers |pairs(l, c)|.
BigInt alive_cardinality(const OperationGraph& graph);

}  // namespace bsnas
