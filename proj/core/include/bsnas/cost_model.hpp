#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bsnas/search_space.hpp"

namespace bsnas {

// Cost conventions: one multiply-accumulate counts as one FLOP. Batch norm,
// activations, biases and pooling are free. Convolutions use "same" padding.

struct LayerCost {
  std::string label;
  std::int64_t macs = 0;
  std::int64_t params = 0;
};

struct CostBreakdown {
  std::vector<LayerCost> per_layer;
  std::int64_t total_macs = 0;
  std::int64_t total_params = 0;
};

struct ConvCost {
  std::int64_t macs = 0;
  std::int64_t params = 0;
  int out_resolution = 0;
};

/// Square convolution over a square input; groups == in_channels for depthwise.
ConvCost conv2d_cost(int in_resolution, int in_channels, int out_channels, int kernel, int stride,
                     int groups = 1);

/// Inverted residual block split into its three convolutions.
struct BlockCost {
  ConvCost expand;  // zero when hidden == in (t = 1)
  ConvCost depthwise;
  ConvCost project;

  [[nodiscard]] std::int64_t macs() const { return expand.macs + depthwise.macs + project.macs; }
  [[nodiscard]] std::int64_t params() const {
    return expand.params + depthwise.params + project.params;
  }
};

BlockCost inverted_residual_cost(const BlockShape& shape);

/// Full breakdown over stem, blocks, and tail. Throws ValidationError for
/// architectures that do not belong to `space`.
CostBreakdown flops(const SearchSpace& space, const Architecture& arch);
std::int64_t params(const SearchSpace& space, const Architecture& arch);

/// (min, max) MACs over the space, from the all-min and all-max released
/// architectures; cost is monotone in every gene.
std::pair<std::int64_t, std::int64_t> flops_bounds(const SearchSpace& space);

}  // namespace bsnas
