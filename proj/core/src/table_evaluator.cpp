#include "bsnas/table_evaluator.hpp"

#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "bsnas/errors.hpp"

namespace bsnas {

namespace {

std::size_t gene_distance(const Architecture& a, const Architecture& b) {
  if (a.layer_genes.size() != b.layer_genes.size() ||
      a.cluster_genes.size() != b.cluster_genes.size()) {
    return std::numeric_limits<std::size_t>::max();
  }
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.layer_genes.size(); ++i) d += a.layer_genes[i] != b.layer_genes[i];
  for (std::size_t i = 0; i < a.cluster_genes.size(); ++i) {
    d += a.cluster_genes[i] != b.cluster_genes[i];
  }
  return d;
}

}  // namespace

MissingPolicy parse_missing_policy(std::string_view text) {
  if (text == "error") return MissingPolicy::error;
  if (text == "default") return MissingPolicy::fixed_default;
  if (text == "nearest") return MissingPolicy::nearest;
  throw ConfigError("unknown missing-key policy '" + std::string(text) + "'");
}

TableEvaluator::TableEvaluator(std::map<std::string, double> table, MissingPolicy policy,
                               double default_score)
    : table_(std::move(table)), policy_(policy), default_score_(default_score) {
  for (const auto& [key, score] : table_) {
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ConfigError("table score for '" + key + "' is outside [0, 1]");
    }
    if (policy_ == MissingPolicy::nearest) parsed_.emplace(key, Architecture::parse(key));
  }
  if (policy_ == MissingPolicy::nearest && table_.empty()) {
    throw ConfigError("nearest-neighbour policy needs a non-empty table");
  }
}

std::map<std::string, double> TableEvaluator::read_jsonl(std::istream& in) {
  std::map<std::string, double> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      auto key = record.at("arch").get<std::string>();
      Architecture::parse(key);  // reject malformed keys early
      table[std::move(key)] = record.at("top1").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

TableEvaluator TableEvaluator::load(const std::filesystem::path& path, MissingPolicy policy,
                                    double default_score) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table file " + path.string());
  return TableEvaluator(read_jsonl(in), policy, default_score);
}

double TableEvaluator::lookup(const Architecture& arch) const {
  const auto key = arch.canonical();
  if (const auto it = table_.find(key); it != table_.end()) return it->second;
  switch (policy_) {
    case MissingPolicy::error:
      throw MissingArchitectureError("architecture not in table: " + key);
    case MissingPolicy::fixed_default:
      return default_score_;
    case MissingPolicy::nearest:
      break;
  }
  const std::string* best_key = nullptr;
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (const auto& [candidate_key, candidate] : parsed_) {
    const auto d = gene_distance(arch, candidate);
    if (d < best) {
      best = d;
      best_key = &candidate_key;
    }
  }
  if (best_key == nullptr || best == std::numeric_limits<std::size_t>::max()) {
    throw MissingArchitectureError("no comparable table entry for " + key);
  }
  return table_.at(*best_key);
}

double TableEvaluator::evaluate(const Architecture& arch, Rng& /*noise*/) const {
  return lookup(arch);
}

}  // namespace bsnas
