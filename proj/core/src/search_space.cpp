#include "bsnas/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "bsnas/errors.hpp"
#include "bsnas/operation_graph.hpp"
#include "bsnas/rng.hpp"

namespace bsnas {

namespace {

bool strictly_increasing(const std::vector<int>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](int a, int b) { return a >= b; }) == v.end();
}

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::string join(const std::vector<int>& v) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  out << '}';
  return out.str();
}

// Parses a decimal integer that must span the whole of `text`.
int parse_int(std::string_view text, std::string_view context) {
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("malformed integer '" + std::string(text) + "' in '" +
                      std::string(context) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

LayerGene parse_layer_token(std::string_view token) {
  // k<int>t<int>
  const auto t_pos = token.find('t');
  if (token.size() < 4 || token.front() != 'k' || t_pos == std::string_view::npos) {
    throw ConfigError("malformed layer gene '" + std::string(token) + "'");
  }
  return {parse_int(token.substr(1, t_pos - 1), token), parse_int(token.substr(t_pos + 1), token)};
}

void check_choice_list(const std::vector<int>& v, std::string_view what, int cluster) {
  if (v.empty()) {
    throw ConfigError("cluster " + std::to_string(cluster + 1) + ": empty " + std::string(what) +
                      " list");
  }
  if (!strictly_increasing(v)) {
    throw ConfigError("cluster " + std::to_string(cluster + 1) + ": " + std::string(what) +
                      " choices must be strictly increasing");
  }
  if (v.front() <= 0) {
    throw ConfigError("cluster " + std::to_string(cluster + 1) + ": " + std::string(what) +
                      " choices must be positive");
  }
}

void check_fixed_layer(const FixedLayer& layer, std::string_view where) {
  const bool needs_channels =
      layer.kind == FixedLayerKind::conv || layer.kind == FixedLayerKind::separable;
  if (needs_channels && layer.out_channels <= 0) {
    throw ConfigError(std::string(where) + ": output channels must be positive");
  }
  if (layer.kernel <= 0 || (layer.kernel % 2 == 0 && layer.kind != FixedLayerKind::avgpool)) {
    throw ConfigError(std::string(where) + ": kernel must be a positive odd integer");
  }
  if (layer.stride <= 0) throw ConfigError(std::string(where) + ": stride must be positive");
}

}  // namespace

int conv_output_size(int input, int kernel, int stride) {
  const int pad = kernel / 2;
  return (input + 2 * pad - kernel) / stride + 1;
}

std::string Op::to_string() const {
  return "k" + std::to_string(kernel) + "t" + std::to_string(expansion) + "c" +
         std::to_string(channel);
}

Op Op::parse(std::string_view text) {
  const auto c_pos = text.find('c');
  if (c_pos == std::string_view::npos) throw ConfigError("malformed op '" + std::string(text) + "'");
  const LayerGene gene = parse_layer_token(text.substr(0, c_pos));
  return {gene.kernel, gene.expansion, parse_int(text.substr(c_pos + 1), text)};
}

std::string_view to_string(ArchMode mode) {
  return mode == ArchMode::supernet ? "supernet" : "released";
}

ArchMode parse_mode(std::string_view text) {
  if (text == "supernet") return ArchMode::supernet;
  if (text == "released") return ArchMode::released;
  throw ConfigError("unknown architecture mode '" + std::string(text) + "'");
}

std::string Architecture::canonical() const {
  std::string out;
  for (std::size_t i = 0; i < layer_genes.size(); ++i) {
    if (i) out += '|';
    out += 'k' + std::to_string(layer_genes[i].kernel) + 't' +
           std::to_string(layer_genes[i].expansion);
  }
  out += '#';
  for (std::size_t i = 0; i < cluster_genes.size(); ++i) {
    if (i) out += '|';
    out += 'c' + std::to_string(cluster_genes[i]);
  }
  return out;
}

Architecture Architecture::parse(std::string_view text, ArchMode mode) {
  const auto hash = text.find('#');
  if (hash == std::string_view::npos || text.find('#', hash + 1) != std::string_view::npos) {
    throw ConfigError("architecture string needs exactly one '#': '" + std::string(text) + "'");
  }
  Architecture arch;
  arch.mode = mode;
  const auto layers = text.substr(0, hash);
  if (!layers.empty()) {
    for (auto token : split(layers, '|')) arch.layer_genes.push_back(parse_layer_token(token));
  }
  const auto clusters = text.substr(hash + 1);
  if (!clusters.empty()) {
    for (auto token : split(clusters, '|')) {
      if (token.size() < 2 || token.front() != 'c') {
        throw ConfigError("malformed cluster gene '" + std::string(token) + "'");
      }
      arch.cluster_genes.push_back(parse_int(token.substr(1), token));
    }
  }
  return arch;
}

SearchSpace::SearchSpace(std::vector<FixedLayer> stem, std::vector<ClusterSpec> clusters,
                         std::vector<FixedLayer> tail, int input_size, int n_class,
                         int input_channels, int channel_quantum)
    : stem_(std::move(stem)),
      clusters_(std::move(clusters)),
      tail_(std::move(tail)),
      input_size_(input_size),
      n_class_(n_class),
      input_channels_(input_channels),
      channel_quantum_(channel_quantum) {
  if (input_size_ <= 0) throw ConfigError("input_size must be positive");
  if (n_class_ <= 0) throw ConfigError("n_class must be positive");
  if (input_channels_ <= 0) throw ConfigError("input_channels must be positive");
  if (channel_quantum_ <= 0) throw ConfigError("channel_quantum must be positive");
  if (clusters_.empty()) throw ConfigError("search space needs at least one cluster");

  for (std::size_t i = 0; i < stem_.size(); ++i) {
    check_fixed_layer(stem_[i], "stem layer " + std::to_string(i + 1));
    if (stem_[i].kind == FixedLayerKind::classifier || stem_[i].kind == FixedLayerKind::avgpool) {
      throw ConfigError("stem layers must be conv or separable");
    }
  }
  for (std::size_t i = 0; i < tail_.size(); ++i) {
    check_fixed_layer(tail_[i], "tail layer " + std::to_string(i + 1));
  }

  int resolution = stem_output_resolution();
  for (int c = 0; c < cluster_count(); ++c) {
    auto& cluster = clusters_[c];
    if (cluster.block_count < 1) {
      throw ConfigError("cluster " + std::to_string(c + 1) + ": block_count must be >= 1");
    }
    if (cluster.stride != 1 && cluster.stride != 2) {
      throw ConfigError("cluster " + std::to_string(c + 1) + ": stride must be 1 or 2");
    }
    check_choice_list(cluster.choices.kernel_sizes, "kernel", c);
    check_choice_list(cluster.choices.expansion_ratios, "expansion", c);
    check_choice_list(cluster.choices.channel_choices, "channel", c);
    for (int k : cluster.choices.kernel_sizes) {
      if (k % 2 == 0) {
        throw ConfigError("cluster " + std::to_string(c + 1) + ": kernel " + std::to_string(k) +
                          " is not odd");
      }
    }
    for (int ch : cluster.choices.channel_choices) {
      if (ch % channel_quantum_ != 0) {
        throw ConfigError("cluster " + std::to_string(c + 1) + ": channel " + std::to_string(ch) +
                          " is not a multiple of " + std::to_string(channel_quantum_));
      }
    }
    if (cluster.input_resolution == 0) {
      cluster.input_resolution = resolution;
    } else if (cluster.input_resolution != resolution) {
      throw ConfigError("cluster " + std::to_string(c + 1) + ": declared input resolution " +
                        std::to_string(cluster.input_resolution) + " but the network delivers " +
                        std::to_string(resolution));
    }

    cluster_first_.push_back(static_cast<int>(layer_cluster_.size()));
    for (int b = 0; b < cluster.block_count; ++b) {
      layer_cluster_.push_back(c);
      std::vector<Op> ops;
      for (int k : cluster.choices.kernel_sizes) {
        for (int t : cluster.choices.expansion_ratios) {
          for (int ch : cluster.choices.channel_choices) ops.push_back({k, t, ch});
        }
      }
      layer_ops_.push_back(std::move(ops));
    }
    // Resolution is kernel-independent for odd kernels with same padding.
    resolution = conv_output_size(resolution, 1, cluster.stride);
  }
}

int SearchSpace::op_index(int layer, const Op& op) const {
  const auto& ops = layer_ops_.at(layer);
  const auto it = std::lower_bound(ops.begin(), ops.end(), op);
  return (it != ops.end() && *it == op) ? static_cast<int>(it - ops.begin()) : -1;
}

Op SearchSpace::op_of(const Architecture& arch, int layer) const {
  const auto& gene = arch.layer_genes.at(layer);
  return {gene.kernel, gene.expansion, arch.cluster_genes.at(cluster_of(layer))};
}

int SearchSpace::stem_output_channels() const {
  return stem_.empty() ? input_channels_ : stem_.back().out_channels;
}

int SearchSpace::stem_output_resolution() const {
  int resolution = input_size_;
  for (const auto& layer : stem_) resolution = conv_output_size(resolution, layer.kernel, layer.stride);
  return resolution;
}

std::vector<BlockShape> SearchSpace::block_shapes(const Architecture& arch) const {
  std::vector<BlockShape> shapes;
  shapes.reserve(layer_cluster_.size());
  int previous_out = stem_output_channels();
  int resolution = stem_output_resolution();
  int layer = 0;
  for (int c = 0; c < cluster_count(); ++c) {
    const auto& cluster = clusters_[c];
    const int width = arch.cluster_genes.at(c);
    for (int b = 0; b < cluster.block_count; ++b, ++layer) {
      const auto& gene = arch.layer_genes.at(layer);
      BlockShape s;
      s.layer = layer;
      s.cluster = c;
      s.head = b == 0;
      s.spring = b == cluster.block_count - 1;
      s.in_channels = s.head ? previous_out : width;
      s.hidden_channels = gene.expansion * s.in_channels;
      s.out_channels =
          (s.spring && arch.mode == ArchMode::supernet) ? cluster.spring_output() : width;
      s.kernel = gene.kernel;
      s.stride = s.head ? cluster.stride : 1;
      s.in_resolution = resolution;
      s.out_resolution = conv_output_size(resolution, gene.kernel, s.stride);
      resolution = s.out_resolution;
      previous_out = s.out_channels;
      shapes.push_back(s);
    }
  }
  return shapes;
}

SearchSpace build_default_space(int n_class) {
  const std::vector<int> kernels{3, 5, 7};
  const std::vector<int> expansions{3, 6};
  auto cluster = [&](int blocks, int stride, std::vector<int> channels, int resolution) {
    return ClusterSpec{blocks, stride, ChoiceSets{kernels, expansions, std::move(channels)},
                       resolution};
  };
  std::vector<FixedLayer> stem{
      {FixedLayerKind::conv, 32, 3, 2},
      {FixedLayerKind::separable, 16, 3, 1},
  };
  std::vector<ClusterSpec> clusters{
      cluster(2, 2, {24, 32, 40}, 112),   cluster(4, 2, {40, 48, 56}, 56),
      cluster(4, 2, {64, 72, 80}, 28),    cluster(4, 1, {96, 112, 128}, 14),
      cluster(4, 2, {160, 192, 224}, 14), cluster(1, 1, {240, 280, 320}, 7),
  };
  std::vector<FixedLayer> tail{
      {FixedLayerKind::conv, 1280, 1, 1},
      {FixedLayerKind::avgpool, 0, 7, 1},
      {FixedLayerKind::classifier, 0, 1, 1},
  };
  return SearchSpace(std::move(stem), std::move(clusters), std::move(tail), 224, n_class);
}

BigInt cardinality(const SearchSpace& space) {
  BigInt total = 1;
  for (int layer = 0; layer < space.layer_count(); ++layer) {
    const auto& ch = space.choices(layer);
    total *= static_cast<unsigned>(ch.kernel_sizes.size() * ch.expansion_ratios.size());
  }
  for (const auto& cluster : space.clusters()) {
    total *= static_cast<unsigned>(cluster.choices.channel_choices.size());
  }
  return total;
}

std::vector<std::string> validate(const SearchSpace& space, const Architecture& arch) {
  std::vector<std::string> violations;
  const auto layers = static_cast<std::size_t>(space.layer_count());
  const auto clusters = static_cast<std::size_t>(space.cluster_count());
  if (arch.layer_genes.size() != layers) {
    violations.push_back("length mismatch: expected " + std::to_string(layers) +
                         " layer genes, got " + std::to_string(arch.layer_genes.size()));
  }
  if (arch.cluster_genes.size() != clusters) {
    violations.push_back("length mismatch: expected " + std::to_string(clusters) +
                         " cluster genes, got " + std::to_string(arch.cluster_genes.size()));
  }
  for (std::size_t l = 0; l < std::min(layers, arch.layer_genes.size()); ++l) {
    const auto& ch = space.choices(static_cast<int>(l));
    const auto& gene = arch.layer_genes[l];
    if (!contains(ch.kernel_sizes, gene.kernel)) {
      violations.push_back("layer " + std::to_string(l + 1) + ": kernel " +
                           std::to_string(gene.kernel) + " not in " + join(ch.kernel_sizes));
    }
    if (!contains(ch.expansion_ratios, gene.expansion)) {
      violations.push_back("layer " + std::to_string(l + 1) + ": expansion " +
                           std::to_string(gene.expansion) + " not in " +
                           join(ch.expansion_ratios));
    }
  }
  for (std::size_t c = 0; c < std::min(clusters, arch.cluster_genes.size()); ++c) {
    const auto& channels = space.clusters()[c].choices.channel_choices;
    if (!contains(channels, arch.cluster_genes[c])) {
      violations.push_back("cluster " + std::to_string(c + 1) + ": channel " +
                           std::to_string(arch.cluster_genes[c]) + " not in " + join(channels));
    }
  }
  return violations;
}

void require_valid(const SearchSpace& space, const Architecture& arch) {
  const auto violations = validate(space, arch);
  if (violations.empty()) return;
  std::string message = "invalid architecture";
  for (const auto& v : violations) message += "; " + v;
  throw ValidationError(message);
}

Architecture random_architecture(const SearchSpace& space, Rng& rng, const OperationGraph* alive) {
  Architecture arch;
  arch.layer_genes.resize(space.layer_count());
  arch.cluster_genes.resize(space.cluster_count());
  for (int c = 0; c < space.cluster_count(); ++c) {
    const auto& choices = space.clusters()[c].choices;
    const int first = space.first_layer(c);
    const int blocks = space.clusters()[c].block_count;
    if (alive == nullptr) {
      arch.cluster_genes[c] = choices.channel_choices[rng.below(choices.channel_choices.size())];
      for (int l = first; l < first + blocks; ++l) {
        const auto k = choices.kernel_sizes[rng.below(choices.kernel_sizes.size())];
        const auto t = choices.expansion_ratios[rng.below(choices.expansion_ratios.size())];
        arch.layer_genes[l] = {k, t};
      }
      continue;
    }
    const auto feasible = alive->feasible_channels(c);
    if (feasible.empty()) {
      throw InfeasibleError("cluster " + std::to_string(c + 1) + " has no feasible channel");
    }
    const int channel = feasible[rng.below(feasible.size())];
    arch.cluster_genes[c] = channel;
    for (int l = first; l < first + blocks; ++l) {
      const auto pairs = alive->alive_pairs(l, channel);
      if (pairs.empty()) {
        throw InfeasibleError("layer " + std::to_string(l + 1) + " has no alive operation");
      }
      arch.layer_genes[l] = pairs[rng.below(pairs.size())];
    }
  }
  return arch;
}

Architecture release_spring_blocks(const SearchSpace& space, const Architecture& arch) {
  require_valid(space, arch);
  Architecture released = arch;
  released.mode = ArchMode::released;
  return released;
}

Architecture extreme_architecture(const SearchSpace& space, bool largest, ArchMode mode) {
  Architecture arch;
  arch.mode = mode;
  for (int l = 0; l < space.layer_count(); ++l) {
    const auto& ch = space.choices(l);
    arch.layer_genes.push_back(largest ? LayerGene{ch.kernel_sizes.back(), ch.expansion_ratios.back()}
                                       : LayerGene{ch.kernel_sizes.front(),
                                                   ch.expansion_ratios.front()});
  }
  for (const auto& cluster : space.clusters()) {
    const auto& channels = cluster.choices.channel_choices;
    arch.cluster_genes.push_back(largest ? channels.back() : channels.front());
  }
  return arch;
}

}  // namespace bsnas
