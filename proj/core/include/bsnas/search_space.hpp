#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bsnas {

class Rng;
class OperationGraph;

using BigInt = boost::multiprecision::cpp_int;

/// Options for one cluster of inverted residual blocks. Every block of the
/// cluster shares the kernel and expansion lists; the channel list is the
/// cluster-wide width choice.
struct ChoiceSets {
  std::vector<int> kernel_sizes;
  std::vector<int> expansion_ratios;
  std::vector<int> channel_choices;

  friend bool operator==(const ChoiceSets&, const ChoiceSets&) = default;
};

struct ClusterSpec {
  int block_count = 1;
  int stride = 1;  // applied to the first block only
  ChoiceSets choices;
  int input_resolution = 0;  // derived from the stem when left at 0

  /// Output width of the spring block while the supernet is being searched.
  [[nodiscard]] int spring_output() const { return choices.channel_choices.back(); }

  friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

enum class FixedLayerKind { conv, separable, avgpool, classifier };

/// Non-searchable stem/tail layer. Input channels are never stored: they
/// follow from the previous layer (or from the last spring block for the
/// first tail layer). A classifier always emits `n_class` outputs.
struct FixedLayer {
  FixedLayerKind kind = FixedLayerKind::conv;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;

  friend bool operator==(const FixedLayer&, const FixedLayer&) = default;
};

struct LayerGene {
  int kernel = 3;
  int expansion = 3;

  friend auto operator<=>(const LayerGene&, const LayerGene&) = default;
};

/// One searchable operation of a layer: a (kernel, expansion, channel) triple.
/// Ordering is the canonical op order (kernel, expansion, channel ascending).
struct Op {
  int kernel = 3;
  int expansion = 3;
  int channel = 0;

  [[nodiscard]] LayerGene gene() const { return {kernel, expansion}; }
  [[nodiscard]] std::string to_string() const;  // "k3t6c24"
  static Op parse(std::string_view text);

  friend auto operator<=>(const Op&, const Op&) = default;
};

enum class ArchMode { supernet, released };

std::string_view to_string(ArchMode mode);
ArchMode parse_mode(std::string_view text);

/// A concrete network: one (kernel, expansion) gene per searchable layer and
/// one channel value per cluster.
struct Architecture {
  std::vector<LayerGene> layer_genes;
  std::vector<int> cluster_genes;
  ArchMode mode = ArchMode::supernet;

  /// Identity key, e.g. `k3t6|k5t3|...#c24|c40|...`. Mode is not part of it.
  [[nodiscard]] std::string canonical() const;
  static Architecture parse(std::string_view text, ArchMode mode = ArchMode::supernet);

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Shape of one inverted residual block inside a concrete architecture.
struct BlockShape {
  int layer = 0;
  int cluster = 0;
  int in_channels = 0;
  int hidden_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int in_resolution = 0;
  int out_resolution = 0;
  bool head = false;
  bool spring = false;
};

/// Spatial output size with "same" padding (k / 2).
int conv_output_size(int input, int kernel, int stride);

class SearchSpace {
 public:
  SearchSpace(std::vector<FixedLayer> stem, std::vector<ClusterSpec> clusters,
              std::vector<FixedLayer> tail, int input_size = 224, int n_class = 1000,
              int input_channels = 3, int channel_quantum = 8);

  [[nodiscard]] const std::vector<FixedLayer>& stem() const { return stem_; }
  [[nodiscard]] const std::vector<ClusterSpec>& clusters() const { return clusters_; }
  [[nodiscard]] const std::vector<FixedLayer>& tail() const { return tail_; }
  [[nodiscard]] int input_size() const { return input_size_; }
  [[nodiscard]] int n_class() const { return n_class_; }
  [[nodiscard]] int input_channels() const { return input_channels_; }
  [[nodiscard]] int channel_quantum() const { return channel_quantum_; }

  /// Total searchable layers H.
  [[nodiscard]] int layer_count() const { return static_cast<int>(layer_cluster_.size()); }
  [[nodiscard]] int cluster_count() const { return static_cast<int>(clusters_.size()); }
  [[nodiscard]] int cluster_of(int layer) const { return layer_cluster_.at(layer); }
  [[nodiscard]] int first_layer(int cluster) const { return cluster_first_.at(cluster); }
  [[nodiscard]] const ChoiceSets& choices(int layer) const {
    return clusters_[cluster_of(layer)].choices;
  }
  /// All operations of a layer in canonical order (O_N of them).
  [[nodiscard]] const std::vector<Op>& layer_ops(int layer) const { return layer_ops_.at(layer); }
  /// Index of `op` in layer_ops(layer), or -1.
  [[nodiscard]] int op_index(int layer, const Op& op) const;
  /// Operation used by `arch` at `layer`.
  [[nodiscard]] Op op_of(const Architecture& arch, int layer) const;

  [[nodiscard]] int stem_output_channels() const;
  [[nodiscard]] int stem_output_resolution() const;
  /// Per-block shapes; mode-aware for spring outputs. `arch` must be valid.
  [[nodiscard]] std::vector<BlockShape> block_shapes(const Architecture& arch) const;

  friend bool operator==(const SearchSpace& a, const SearchSpace& b) {
    return a.stem_ == b.stem_ && a.clusters_ == b.clusters_ && a.tail_ == b.tail_ &&
           a.input_size_ == b.input_size_ && a.n_class_ == b.n_class_ &&
           a.input_channels_ == b.input_channels_ && a.channel_quantum_ == b.channel_quantum_;
  }

 private:
  std::vector<FixedLayer> stem_;
  std::vector<ClusterSpec> clusters_;
  std::vector<FixedLayer> tail_;
  int input_size_;
  int n_class_;
  int input_channels_;
  int channel_quantum_;

  std::vector<int> layer_cluster_;
  std::vector<int> cluster_first_;
  std::vector<std::vector<Op>> layer_ops_;
};

/// The 19-layer, 6-cluster MobileNetV2-style channel-searchable supernet.
SearchSpace build_default_space(int n_class = 1000);

/// Number of architectures: prod over layers of |k|*|t| times prod over
/// clusters of |c|.
BigInt cardinality(const SearchSpace& space);

/// All invariant violations of `arch` against `space`; empty iff valid.
std::vector<std::string> validate(const SearchSpace& space, const Architecture& arch);
/// Throws ValidationError listing the violations.
void require_valid(const SearchSpace& space, const Architecture& arch);

/// Uniform over valid architectures, or over alive-respecting ones when
/// `alive` is given (channel first, then a (k, t) pair alive under it).
Architecture random_architecture(const SearchSpace& space, Rng& rng,
                                 const OperationGraph* alive = nullptr);

/// Stand-alone form: spring blocks emit the chosen cluster width. Genes are
/// unchanged; already-released input is returned as is.
Architecture release_spring_blocks(const SearchSpace& space, const Architecture& arch);

/// The architecture with every gene at its smallest (or largest) choice.
Architecture extreme_architecture(const SearchSpace& space, bool largest,
                                  ArchMode mode = ArchMode::released);

}  // namespace bsnas
