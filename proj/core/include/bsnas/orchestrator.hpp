#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bsnas/evolution.hpp"
#include "bsnas/shrinking.hpp"
#include "bsnas/table_evaluator.hpp"

namespace bsnas {

struct EvaluatorConfig {
  std::string backend = "surrogate";  // surrogate | table
  // surrogate
  double coupling = 0.2;
  double half_life = 60.0;
  double noise_sd = 0.01;
  std::optional<std::uint64_t> params_seed;  // defaults to the run seed
  std::filesystem::path params_path;         // import instead of generating
  // table
  std::filesystem::path table_path;
  MissingPolicy missing = MissingPolicy::error;
  double default_score = 0.0;
};

/// Everything a run needs. All randomness derives from `seed` through the
/// named streams "sampling", "shrink-noise", "evolution", "evolution-noise",
/// "report", "report-noise" and "surrogate-params".
struct RunConfig {
  SearchSpace space = build_default_space();
  ShrinkSchedule schedule;
  EvolutionConfig evolution;
  EvaluatorConfig evaluator;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "bsnas-out";
  int workers = 1;
};

/// Parses a run config. `space` is "default", a path (relative to
/// `base_dir`), or an inline definition; `seed` is required.
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);
/// BSNAS_OUTPUT_DIR and BSNAS_WORKERS override the file values.
void apply_environment(RunConfig& config);

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config);

/// Resume point written after every shrinking round.
struct Checkpoint {
  std::uint64_t seed = 0;
  ShrinkState state;
  nlohmann::json evaluator_state;
  std::map<std::string, std::uint64_t> stream_offsets;  // bytes per output file
};

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const SearchSpace& space, const nlohmann::json& j);
Checkpoint load_checkpoint(const SearchSpace& space, const std::filesystem::path& path);

struct PipelineOptions {
  bool resume = false;
  bool overwrite = false;
  bool run_evolution = true;
  /// Stops (as if killed) right after the checkpoint of this round.
  std::optional<int> stop_after_round;
  /// Optional progress log.
  std::ostream* log = nullptr;
};

struct PipelineSummary {
  OperationGraph graph;
  std::vector<ShrinkReport> reports;  // rounds run by this invocation
  std::optional<EvolutionResult> evolution;
  bool interrupted = false;
};

/// Output files, all under `output_dir`:
///   evals.jsonl        one record per evaluation (shrinking and evolution)
///   reports.jsonl      per-layer retention decisions and per-step summaries
///   evolution.jsonl    per-iteration statistics
///   checkpoint.json    latest resume point
///   graph_step<r>.json checkpoint taken after round r
///   graph.json         final shrunk graph with evaluator state
///   best.json          best architecture (score, MACs, params)
PipelineSummary run_pipeline(const RunConfig& config, const PipelineOptions& options = {});

/// Evolution on a saved graph checkpoint; writes evals.jsonl,
/// evolution.jsonl and best.json into the config's output directory.
EvolutionResult run_evolution_from_checkpoint(const RunConfig& config,
                                              const std::filesystem::path& checkpoint,
                                              bool overwrite = false);

nlohmann::json best_to_json(const SearchSpace& space, const EvalRecord& best,
                            const Evaluator& evaluator);

// Accuracy distribution per shrink step.

struct DistributionInput {
  std::string label;
  OperationGraph graph;
  nlohmann::json evaluator_state;
};

struct DistributionRow {
  std::string step;
  int sample_index = 0;
  std::string arch;
  double score = 0.0;
};

struct DistributionSummary {
  std::string step;
  std::size_t samples = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct DistributionReport {
  std::vector<DistributionRow> rows;
  std::vector<DistributionSummary> summary;
  std::vector<std::string> warnings;  // skipped inputs
};

/// Samples `n_samples` alive architectures from every input graph and scores
/// them with the evaluator restored to the input's training state.
DistributionReport distribution_report(const SearchSpace& space,
                                       const std::vector<DistributionInput>& inputs,
                                       Evaluator& evaluator, int n_samples, Rng rng, Rng noise);

/// Training state of a no-shrinking control: the full graph trained for
/// `epochs` virtual epochs.
nlohmann::json control_training_state(const SearchSpace& space, Evaluator& evaluator,
                                      double epochs);

void write_distribution_csv(std::ostream& out, const DistributionReport& report);

// Rank correlation between supernet estimates and stand-alone fitness.

struct RankEntry {
  std::string arch;
  double estimate = 0.0;
  double truth = 0.0;
};

struct RankReport {
  std::vector<RankEntry> selected;
  double spearman = 0.0;
  double kendall = 0.0;
};

/// Picks `top_n` architectures with distinct estimates, evenly spread over
/// the ranking of the distinct evaluated ones (best and worst included), and
/// correlates them with `truth`. Throws ContractViolation with fewer than 3.
RankReport rank_correlation(const std::vector<EvalRecord>& evals,
                            const std::function<double(const Architecture&)>& truth, int top_n);

nlohmann::json rank_report_to_json(const RankReport& report);
void write_rank_csv(std::ostream& out, const RankReport& report);

/// Reads evaluation records from an evals.jsonl stream; `phase` filters on
/// the record's phase field when non-empty.
std::vector<EvalRecord> read_eval_records(std::istream& in, const std::string& phase = {});

/// RFC 4180 field quoting.
std::string csv_field(const std::string& text);

}  // namespace bsnas
