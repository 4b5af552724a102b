#pragma once

// Small spaces and independent oracles shared by the unit and acceptance
// tests. Nothing here calls into the cost model or the scorer it checks.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "bsnas/operation_graph.hpp"
#include "bsnas/rng.hpp"
#include "bsnas/search_space.hpp"
#include "bsnas/shrinking.hpp"

namespace bsnas::fixtures {

/// Stem conv 3x3 s2 to 16, `clusters.size()` clusters of the given block
/// counts with the given choice sets, tail conv 1x1 to 64, avgpool,
/// classifier. Input 32x32 keeps brute-force oracles fast.
inline SearchSpace small_space(const std::vector<int>& block_counts,
                               const std::vector<int>& kernels, const std::vector<int>& expansions,
                               const std::vector<std::vector<int>>& channels, int input = 32) {
  std::vector<ClusterSpec> clusters;
  for (std::size_t c = 0; c < block_counts.size(); ++c) {
    clusters.push_back(ClusterSpec{block_counts[c], c % 2 == 0 ? 2 : 1,
                                   ChoiceSets{kernels, expansions, channels[c]}, 0});
  }
  return SearchSpace({{FixedLayerKind::conv, 16, 3, 2}}, std::move(clusters),
                     {{FixedLayerKind::conv, 64, 1, 1},
                      {FixedLayerKind::avgpool, 0, input / 4, 1},
                      {FixedLayerKind::classifier, 0, 1, 1}},
                     input, 10);
}

/// 2 layers x {(3,3), (3,6)} pairs, one cluster x 3 channels: 12 architectures.
inline SearchSpace twelve_space() { return small_space({2}, {3}, {3, 6}, {{8, 16, 24}}); }

/// 4 layers x 3 ops (kernels 3/5/7, one expansion, one channel): 81 architectures.
inline SearchSpace eighty_one_space() { return small_space({4}, {3, 5, 7}, {3}, {{16}}); }

/// Every architecture of `space`, channels then layers, last varying fastest.
inline std::vector<Architecture> enumerate_all(const SearchSpace& space) {
  std::vector<Architecture> out;
  Architecture arch;
  arch.layer_genes.resize(space.layer_count());
  arch.cluster_genes.resize(space.cluster_count());
  const int genes = space.cluster_count() + space.layer_count();
  auto options = [&](int g) -> std::size_t {
    if (g < space.cluster_count()) return space.clusters()[g].choices.channel_choices.size();
    const auto& ch = space.choices(g - space.cluster_count());
    return ch.kernel_sizes.size() * ch.expansion_ratios.size();
  };
  std::vector<std::size_t> digit(genes, 0);
  while (true) {
    for (int g = 0; g < genes; ++g) {
      if (g < space.cluster_count()) {
        arch.cluster_genes[g] = space.clusters()[g].choices.channel_choices[digit[g]];
      } else {
        const int l = g - space.cluster_count();
        const auto& ch = space.choices(l);
        const auto t = ch.expansion_ratios.size();
        arch.layer_genes[l] = {ch.kernel_sizes[digit[g] / t], ch.expansion_ratios[digit[g] % t]};
      }
    }
    out.push_back(arch);
    int g = genes - 1;
    while (g >= 0 && ++digit[g] == options(g)) digit[g--] = 0;
    if (g < 0) break;
  }
  return out;
}

/// MACs of a square convolution found by walking every output position and
/// every kernel tap, padding taps included (zero-padded inputs still cost a
/// multiply-add in the mobile-network convention).
inline std::int64_t position_macs(int in_res, int in_ch, int out_ch, int k, int stride,
                                  int groups) {
  const int pad = k / 2;
  std::int64_t macs = 0;
  for (int y = -pad; y + k <= in_res + pad; y += stride) {
    for (int x = -pad; x + k <= in_res + pad; x += stride) {
      for (int o = 0; o < out_ch; ++o) {
        const int per_group = in_ch / groups;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) macs += per_group;
        }
      }
    }
  }
  return macs;
}

/// Output side length found by walking positions.
inline int position_out_res(int in_res, int k, int stride) {
  const int pad = k / 2;
  int n = 0;
  for (int y = -pad; y + k <= in_res + pad; y += stride) ++n;
  return n;
}

// Per-block MACs of the default space, with shapes derived here from the
// layout table rather than from SearchSpace::block_shapes.
inline std::vector<std::int64_t> reference_block_macs(const Architecture& arch) {
  const std::vector<int> blocks{2, 4, 4, 4, 4, 1};
  const std::vector<int> strides{2, 2, 2, 1, 2, 1};
  const std::vector<int> spring{40, 56, 80, 128, 224, 320};
  const bool released = arch.mode == ArchMode::released;
  std::vector<std::int64_t> out;
  int res = 112;
  int in = 16;
  int layer = 0;
  for (int c = 0; c < 6; ++c) {
    const int chosen = arch.cluster_genes[c];
    for (int b = 0; b < blocks[c]; ++b, ++layer) {
      const auto gene = arch.layer_genes[layer];
      const int stride = b == 0 ? strides[c] : 1;
      const int cout = (b == blocks[c] - 1 && !released) ? spring[c] : chosen;
      const int hidden = in * gene.expansion;
      std::int64_t macs = 0;
      if (hidden != in) macs += position_macs(res, in, hidden, 1, 1, 1);
      macs += position_macs(res, hidden, hidden, gene.kernel, stride, hidden);
      const int out_res = position_out_res(res, gene.kernel, stride);
      macs += position_macs(out_res, hidden, cout, 1, 1, 1);
      out.push_back(macs);
      res = out_res;
      in = cout;
    }
  }
  return out;
}

/// Retention counts by direct definition: sort a copy by score descending
/// with canonical tie-break, take floor(n/3) from both ends, count.
struct Counts {
  int top = 0;
  int bottom = 0;
  int total = 0;
};

inline std::vector<std::map<std::string, Counts>> count_thirds(
    const SearchSpace& space, std::vector<std::pair<Architecture, double>> batch) {
  std::stable_sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first.canonical() < b.first.canonical();
  });
  const auto n = batch.size();
  const auto third = n / 3;
  std::vector<std::map<std::string, Counts>> out(space.layer_count());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& arch = batch[i].first;
    for (int l = 0; l < space.layer_count(); ++l) {
      const Op op{arch.layer_genes[l].kernel, arch.layer_genes[l].expansion,
                  arch.cluster_genes[space.cluster_of(l)]};
      auto& c = out[l][op.to_string()];
      ++c.total;
      if (i < third) ++c.top;
      if (i >= n - third) ++c.bottom;
    }
  }
  return out;
}

/// Random graph with every layer and cluster kept feasible: kills each
/// triple with probability `kill`, then revives one triple per layer of a
/// channel picked per cluster.
inline OperationGraph random_graph(const SearchSpace& space, Rng& rng, double kill) {
  OperationGraph g(space);
  for (int l = 0; l < g.layer_count(); ++l) {
    for (int op = 0; op < g.op_count(l); ++op) {
      if (rng.uniform() < kill) g.set_alive(l, op, false);
    }
  }
  for (int c = 0; c < g.cluster_count(); ++c) {
    const auto& channels = g.cluster_channels(c);
    const int channel = channels[rng.below(channels.size())];
    for (int l : g.cluster_layers(c)) {
      std::vector<int> candidates;
      for (int op = 0; op < g.op_count(l); ++op) {
        if (g.ops(l)[op].channel == channel) candidates.push_back(op);
      }
      g.set_alive(l, candidates[rng.below(candidates.size())], true);
    }
  }
  return g;
}

}  // namespace bsnas::fixtures
