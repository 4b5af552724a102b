#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "bsnas/operation_graph.hpp"
#include "bsnas/search_space.hpp"
#include "bsnas/shrinking.hpp"

namespace bsnas {

// Space definition files mirror the supernet table, one row per stem/tail
// layer or per cluster:
//
//   {"input_size": 224, "n_class": 1000, "input_channels": 3,
//    "channel_quantum": 8,
//    "layers": [
//      {"input": [224, 3], "operator": "conv2d", "k": 3, "c": 32, "s": 2},
//      {"input": [112, 32], "operator": "separable", "k": 3, "c": 16, "s": 1},
//      {"input": [112, 16], "operator": "bottleneck", "n": 2,
//       "k": [3, 5, 7], "t": [3, 6], "c": [24, 32, 40], "s": 2},
//      ...
//      {"input": [7, 320], "operator": "conv2d", "k": 1, "c": 1280, "s": 1},
//      {"input": [7, 1280], "operator": "avgpool", "k": 7},
//      {"input": [1, 1280], "operator": "conv2d", "k": 1, "c": "n_class"}]}
//
// "input" is optional and checked against the derived shape when present.
// Rows before the first bottleneck form the stem, rows after the last one
// the tail; a 1x1 conv to "n_class" is the classifier.

nlohmann::json space_to_json(const SearchSpace& space);
SearchSpace space_from_json(const nlohmann::json& j);
SearchSpace load_space(const std::filesystem::path& path);

nlohmann::json arch_to_json(const Architecture& arch);
/// Accepts {"arch": "<canonical>", "mode": ...} or the expanded
/// {"layers": [{"k":..,"t":..}], "channels": [..], "mode": ..} form.
Architecture arch_from_json(const nlohmann::json& j);

nlohmann::json graph_to_json(const OperationGraph& graph);
OperationGraph graph_from_json(const SearchSpace& space, const nlohmann::json& j);

nlohmann::json rng_to_json(const Rng& rng);
Rng rng_from_json(const nlohmann::json& j);

/// One JSONL record per layer, then one per step summary.
std::vector<nlohmann::json> report_records(const ShrinkReport& report);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace bsnas
