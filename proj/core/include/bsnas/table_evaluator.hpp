#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "bsnas/evaluator.hpp"

namespace bsnas {

enum class MissingPolicy { error, fixed_default, nearest };

MissingPolicy parse_missing_policy(std::string_view text);

/// Lookup-table backend keyed by canonical architecture string. Bridges to
/// accuracies measured on an externally trained supernet.
///
/// File format: JSONL, one `{"arch": "<canonical>", "top1": <real>}` per line.
/// `nearest` picks the entry with the fewest differing genes; ties go to the
/// lexicographically smallest key.
class TableEvaluator final : public Evaluator {
 public:
  explicit TableEvaluator(std::map<std::string, double> table,
                          MissingPolicy policy = MissingPolicy::error, double default_score = 0.0);

  static TableEvaluator load(const std::filesystem::path& path,
                             MissingPolicy policy = MissingPolicy::error,
                             double default_score = 0.0);
  static std::map<std::string, double> read_jsonl(std::istream& in);

  [[nodiscard]] std::string name() const override { return "table"; }
  [[nodiscard]] double evaluate(const Architecture& arch, Rng& noise) const override;
  [[nodiscard]] bool concurrency_safe() const override { return true; }

  [[nodiscard]] double lookup(const Architecture& arch) const;
  [[nodiscard]] std::size_t size() const { return table_.size(); }

 private:
  std::map<std::string, double> table_;
  std::map<std::string, Architecture> parsed_;
  MissingPolicy policy_;
  double default_score_;
};

}  // namespace bsnas
