#include "bsnas/space_io.hpp"

#include <fstream>

#include "bsnas/errors.hpp"

namespace bsnas {

using nlohmann::json;

namespace {

struct RowShape {
  int resolution;
  int channels;
};

// Input shape of every table row in supernet mode, in row order.
std::vector<RowShape> row_inputs(const SearchSpace& space) {
  std::vector<RowShape> rows;
  int resolution = space.input_size();
  int channels = space.input_channels();
  for (const auto& layer : space.stem()) {
    rows.push_back({resolution, channels});
    resolution = conv_output_size(resolution, layer.kernel, layer.stride);
    channels = layer.out_channels;
  }
  for (const auto& cluster : space.clusters()) {
    rows.push_back({resolution, channels});
    resolution = conv_output_size(resolution, 1, cluster.stride);
    channels = cluster.spring_output();
  }
  for (const auto& layer : space.tail()) {
    rows.push_back({resolution, channels});
    switch (layer.kind) {
      case FixedLayerKind::avgpool:
        resolution = (resolution - layer.kernel) / layer.stride + 1;
        break;
      case FixedLayerKind::classifier:
        channels = space.n_class();
        break;
      default:
        resolution = conv_output_size(resolution, layer.kernel, layer.stride);
        channels = layer.out_channels;
        break;
    }
  }
  return rows;
}

FixedLayer fixed_from_row(const json& row, std::size_t index) {
  const auto op = row.at("operator").get<std::string>();
  FixedLayer layer;
  layer.kernel = row.value("k", 1);
  layer.stride = row.value("s", 1);
  if (op == "conv2d") {
    const auto& c = row.at("c");
    if (c.is_string()) {
      if (c.get<std::string>() != "n_class") {
        throw ConfigError("row " + std::to_string(index + 1) + ": c must be an integer or \"n_class\"");
      }
      layer.kind = FixedLayerKind::classifier;
    } else {
      layer.kind = FixedLayerKind::conv;
      layer.out_channels = c.get<int>();
    }
  } else if (op == "separable") {
    layer.kind = FixedLayerKind::separable;
    layer.out_channels = row.at("c").get<int>();
  } else if (op == "avgpool") {
    layer.kind = FixedLayerKind::avgpool;
  } else {
    throw ConfigError("row " + std::to_string(index + 1) + ": unknown operator '" + op + "'");
  }
  return layer;
}

json fixed_to_row(const FixedLayer& layer) {
  switch (layer.kind) {
    case FixedLayerKind::conv:
      return {{"operator", "conv2d"}, {"k", layer.kernel}, {"c", layer.out_channels}, {"s", layer.stride}};
    case FixedLayerKind::separable:
      return {{"operator", "separable"}, {"k", layer.kernel}, {"c", layer.out_channels},
              {"s", layer.stride}};
    case FixedLayerKind::avgpool:
      return {{"operator", "avgpool"}, {"k", layer.kernel}, {"s", layer.stride}};
    case FixedLayerKind::classifier:
      return {{"operator", "conv2d"}, {"k", 1}, {"c", "n_class"}};
  }
  return {};
}

}  // namespace

json space_to_json(const SearchSpace& space) {
  json rows = json::array();
  for (const auto& layer : space.stem()) rows.push_back(fixed_to_row(layer));
  for (const auto& cluster : space.clusters()) {
    rows.push_back({{"operator", "bottleneck"},
                    {"n", cluster.block_count},
                    {"k", cluster.choices.kernel_sizes},
                    {"t", cluster.choices.expansion_ratios},
                    {"c", cluster.choices.channel_choices},
                    {"s", cluster.stride}});
  }
  for (const auto& layer : space.tail()) rows.push_back(fixed_to_row(layer));
  const auto inputs = row_inputs(space);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i]["input"] = {inputs[i].resolution, inputs[i].channels};
  }
  return {{"input_size", space.input_size()},
          {"n_class", space.n_class()},
          {"input_channels", space.input_channels()},
          {"channel_quantum", space.channel_quantum()},
          {"layers", rows}};
}

SearchSpace space_from_json(const json& j) {
  try {
    const auto& rows = j.at("layers");
    if (!rows.is_array() || rows.empty()) throw ConfigError("space needs a non-empty layers array");
    std::vector<FixedLayer> stem, tail;
    std::vector<ClusterSpec> clusters;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.at("operator").get<std::string>() == "bottleneck") {
        if (!tail.empty()) {
          throw ConfigError("row " + std::to_string(i + 1) + ": bottleneck rows must be contiguous");
        }
        ClusterSpec cluster;
        cluster.block_count = row.value("n", 1);
        cluster.stride = row.value("s", 1);
        row.at("k").get_to(cluster.choices.kernel_sizes);
        row.at("t").get_to(cluster.choices.expansion_ratios);
        row.at("c").get_to(cluster.choices.channel_choices);
        if (row.contains("input")) cluster.input_resolution = row.at("input").at(0).get<int>();
        clusters.push_back(std::move(cluster));
      } else if (clusters.empty()) {
        stem.push_back(fixed_from_row(row, i));
      } else {
        tail.push_back(fixed_from_row(row, i));
      }
    }
    SearchSpace space(std::move(stem), std::move(clusters), std::move(tail),
                      j.value("input_size", 224), j.value("n_class", 1000),
                      j.value("input_channels", 3), j.value("channel_quantum", 8));
    const auto inputs = row_inputs(space);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].contains("input")) continue;
      const auto declared = rows[i].at("input").get<std::vector<int>>();
      if (declared.size() != 2 || declared[0] != inputs[i].resolution ||
          declared[1] != inputs[i].channels) {
        throw ConfigError("row " + std::to_string(i + 1) + ": declared input does not match " +
                          std::to_string(inputs[i].resolution) + "x" +
                          std::to_string(inputs[i].resolution) + "x" +
                          std::to_string(inputs[i].channels));
      }
    }
    return space;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed space definition: ") + e.what());
  }
}

SearchSpace load_space(const std::filesystem::path& path) {
  return space_from_json(read_json_file(path));
}

json arch_to_json(const Architecture& arch) {
  json layers = json::array();
  for (const auto& gene : arch.layer_genes) layers.push_back({{"k", gene.kernel}, {"t", gene.expansion}});
  return {{"arch", arch.canonical()},
          {"mode", to_string(arch.mode)},
          {"layers", layers},
          {"channels", arch.cluster_genes}};
}

Architecture arch_from_json(const json& j) {
  try {
    const auto mode = parse_mode(j.value("mode", std::string("supernet")));
    if (j.contains("arch")) return Architecture::parse(j.at("arch").get<std::string>(), mode);
    Architecture arch;
    arch.mode = mode;
    for (const auto& gene : j.at("layers")) {
      arch.layer_genes.push_back({gene.at("k").get<int>(), gene.at("t").get<int>()});
    }
    j.at("channels").get_to(arch.cluster_genes);
    return arch;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed architecture: ") + e.what());
  }
}

json graph_to_json(const OperationGraph& graph) {
  json layers = json::array();
  for (int l = 0; l < graph.layer_count(); ++l) {
    json alive = json::array();
    json usage = json::object();
    for (int op = 0; op < graph.op_count(l); ++op) {
      const auto name = graph.ops(l)[op].to_string();
      if (graph.alive(l, op)) alive.push_back(name);
      usage[name] = graph.usage(l, op);
    }
    layers.push_back({{"alive", alive}, {"usage", usage}});
  }
  return {{"step_index", graph.step_index()}, {"layers", layers}};
}

OperationGraph graph_from_json(const SearchSpace& space, const json& j) {
  try {
    OperationGraph graph(space);
    const auto& layers = j.at("layers");
    if (layers.size() != static_cast<std::size_t>(space.layer_count())) {
      throw ConfigError("graph has " + std::to_string(layers.size()) + " layers, space has " +
                        std::to_string(space.layer_count()));
    }
    for (int l = 0; l < space.layer_count(); ++l) {
      for (int op = 0; op < graph.op_count(l); ++op) graph.set_alive(l, op, false);
      for (const auto& name : layers[l].at("alive")) {
        const int op = graph.op_index(l, Op::parse(name.get<std::string>()));
        if (op < 0) throw ConfigError("layer " + std::to_string(l + 1) + ": unknown op " + name.dump());
        graph.set_alive(l, op, true);
      }
      if (layers[l].contains("usage")) {
        for (const auto& [name, count] : layers[l].at("usage").items()) {
          const int op = graph.op_index(l, Op::parse(name));
          if (op < 0) throw ConfigError("layer " + std::to_string(l + 1) + ": unknown op " + name);
          graph.add_usage(l, op, count.get<std::uint64_t>());
        }
      }
    }
    graph.set_step_index(j.value("step_index", 0));
    return graph;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed graph: ") + e.what());
  }
}

json rng_to_json(const Rng& rng) { return {{"key", rng.key()}, {"counter", rng.counter()}}; }

Rng rng_from_json(const json& j) {
  return Rng(j.at("key").get<std::uint64_t>(), j.at("counter").get<std::uint64_t>());
}

std::vector<json> report_records(const ShrinkReport& report) {
  std::vector<json> records;
  for (const auto& layer : report.layers) {
    json kept = json::array();
    json ri = json::object();
    json counts = json::object();
    json reinstated = json::array();
    for (const auto& d : layer.ops) {
      const auto name = d.op.to_string();
      if (d.kept) kept.push_back(name);
      if (d.reinstated) reinstated.push_back(name);
      ri[name] = d.score.sampled() ? json(d.score.value()) : json(nullptr);
      counts[name] = {d.score.top, d.score.bottom, d.score.total};
    }
    records.push_back({{"type", "layer"},
                       {"step", report.step},
                       {"layer", layer.layer},
                       {"n_r", report.n_r},
                       {"kept", kept},
                       {"ri", ri},
                       {"counts", counts},
                       {"fallback", layer.fallback},
                       {"closure", layer.closure_fired},
                       {"reinstated", reinstated}});
  }
  records.push_back({{"type", "step"},
                     {"step", report.step},
                     {"n_r", report.n_r},
                     {"batch_size", report.batch_size},
                     {"feasible_channels", report.feasible_channels}});
  return records;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace bsnas
