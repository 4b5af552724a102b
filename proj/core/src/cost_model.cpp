#include "bsnas/cost_model.hpp"

#include "bsnas/errors.hpp"

namespace bsnas {

ConvCost conv2d_cost(int in_resolution, int in_channels, int out_channels, int kernel, int stride,
                     int groups) {
  ConvCost cost;
  cost.out_resolution = conv_output_size(in_resolution, kernel, stride);
  const std::int64_t positions =
      static_cast<std::int64_t>(cost.out_resolution) * cost.out_resolution;
  const std::int64_t weights =
      static_cast<std::int64_t>(out_channels) * (in_channels / groups) * kernel * kernel;
  cost.macs = positions * weights;
  cost.params = weights;
  return cost;
}

BlockCost inverted_residual_cost(const BlockShape& s) {
  BlockCost cost;
  if (s.hidden_channels != s.in_channels) {
    cost.expand = conv2d_cost(s.in_resolution, s.in_channels, s.hidden_channels, 1, 1);
  }
  cost.depthwise = conv2d_cost(s.in_resolution, s.hidden_channels, s.hidden_channels, s.kernel,
                               s.stride, s.hidden_channels);
  cost.project =
      conv2d_cost(cost.depthwise.out_resolution, s.hidden_channels, s.out_channels, 1, 1);
  return cost;
}

namespace {

std::string kernel_label(int k) { return std::to_string(k) + "x" + std::to_string(k); }

}  // namespace

CostBreakdown flops(const SearchSpace& space, const Architecture& arch) {
  require_valid(space, arch);
  CostBreakdown out;
  auto add = [&](std::string label, std::int64_t macs, std::int64_t params) {
    out.total_macs += macs;
    out.total_params += params;
    out.per_layer.push_back({std::move(label), macs, params});
  };

  int resolution = space.input_size();
  int channels = space.input_channels();
  for (std::size_t i = 0; i < space.stem().size(); ++i) {
    const auto& layer = space.stem()[i];
    const std::string prefix = "stem." + std::to_string(i) + " ";
    if (layer.kind == FixedLayerKind::conv) {
      const auto c = conv2d_cost(resolution, channels, layer.out_channels, layer.kernel,
                                 layer.stride);
      add(prefix + "conv" + kernel_label(layer.kernel), c.macs, c.params);
      resolution = c.out_resolution;
    } else {
      // Separable: the inverted residual shape with expansion 1.
      BlockShape s;
      s.in_channels = channels;
      s.hidden_channels = channels;
      s.out_channels = layer.out_channels;
      s.kernel = layer.kernel;
      s.stride = layer.stride;
      s.in_resolution = resolution;
      const auto c = inverted_residual_cost(s);
      add(prefix + "separable" + kernel_label(layer.kernel), c.macs(), c.params());
      resolution = c.depthwise.out_resolution;
    }
    channels = layer.out_channels;
  }

  for (const auto& shape : space.block_shapes(arch)) {
    const auto c = inverted_residual_cost(shape);
    add("block" + std::to_string(shape.layer + 1) + " k" + std::to_string(shape.kernel) + "t" +
            std::to_string(arch.layer_genes[shape.layer].expansion) + " " +
            std::to_string(shape.in_channels) + "->" + std::to_string(shape.out_channels),
        c.macs(), c.params());
    resolution = shape.out_resolution;
    channels = shape.out_channels;
  }

  for (std::size_t i = 0; i < space.tail().size(); ++i) {
    const auto& layer = space.tail()[i];
    const std::string prefix = "tail." + std::to_string(i) + " ";
    switch (layer.kind) {
      case FixedLayerKind::avgpool:
        add(prefix + "avgpool" + kernel_label(layer.kernel), 0, 0);
        resolution = (resolution - layer.kernel) / layer.stride + 1;
        break;
      case FixedLayerKind::classifier: {
        const auto c = conv2d_cost(resolution, channels, space.n_class(), 1, 1);
        add(prefix + "classifier", c.macs, c.params);
        channels = space.n_class();
        break;
      }
      case FixedLayerKind::conv: {
        const auto c = conv2d_cost(resolution, channels, layer.out_channels, layer.kernel,
                                   layer.stride);
        add(prefix + "conv" + kernel_label(layer.kernel), c.macs, c.params);
        resolution = c.out_resolution;
        channels = layer.out_channels;
        break;
      }
      case FixedLayerKind::separable: {
        BlockShape s;
        s.in_channels = channels;
        s.hidden_channels = channels;
        s.out_channels = layer.out_channels;
        s.kernel = layer.kernel;
        s.stride = layer.stride;
        s.in_resolution = resolution;
        const auto c = inverted_residual_cost(s);
        add(prefix + "separable" + kernel_label(layer.kernel), c.macs(), c.params());
        resolution = c.depthwise.out_resolution;
        channels = layer.out_channels;
        break;
      }
    }
  }
  return out;
}

std::int64_t params(const SearchSpace& space, const Architecture& arch) {
  return flops(space, arch).total_params;
}

std::pair<std::int64_t, std::int64_t> flops_bounds(const SearchSpace& space) {
  return {flops(space, extreme_architecture(space, false)).total_macs,
          flops(space, extreme_architecture(space, true)).total_macs};
}

}  // namespace bsnas
