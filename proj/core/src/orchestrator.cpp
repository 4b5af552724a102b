#include "bsnas/orchestrator.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bsnas/cost_model.hpp"
#include "bsnas/errors.hpp"
#include "bsnas/space_io.hpp"
#include "bsnas/stats.hpp"
#include "bsnas/surrogate.hpp"

namespace bsnas {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kEvals = "evals.jsonl";
constexpr const char* kReports = "reports.jsonl";
constexpr const char* kEvolution = "evolution.jsonl";
constexpr const char* kCheckpoint = "checkpoint.json";
constexpr const char* kGraph = "graph.json";
constexpr const char* kBest = "best.json";

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

ShrinkSchedule schedule_from_json(const json& j) {
  ShrinkSchedule s;
  read_optional(j, "t_first", s.t_first);
  read_optional(j, "t_interval", s.t_interval);
  read_optional(j, "retention", s.retention);
  read_optional(j, "test_factor", s.test_factor);
  s.validate();
  return s;
}

EvolutionConfig evolution_from_json(const json& j) {
  EvolutionConfig e;
  read_optional(j, "population", e.population);
  read_optional(j, "iterations", e.iterations);
  read_optional(j, "elite_k", e.elite_k);
  read_optional(j, "mutation_prob", e.mutation_prob);
  read_optional(j, "offspring_crossover", e.offspring_crossover);
  read_optional(j, "offspring_mutation", e.offspring_mutation);
  read_optional(j, "max_resample", e.max_resample);
  read_optional(j, "hall_of_fame", e.hall_of_fame);
  if (j.contains("flops_max") && !j.at("flops_max").is_null()) {
    e.flops_max = j.at("flops_max").get<std::int64_t>();
  }
  if (j.contains("flops_min") && !j.at("flops_min").is_null()) {
    e.flops_min = j.at("flops_min").get<std::int64_t>();
  }
  e.validate();
  return e;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

EvaluatorConfig evaluator_from_json(const json& j, const fs::path& base) {
  EvaluatorConfig e;
  read_optional(j, "backend", e.backend);
  if (e.backend == "surrogate") {
    read_optional(j, "coupling", e.coupling);
    read_optional(j, "half_life", e.half_life);
    read_optional(j, "noise_sd", e.noise_sd);
    if (j.contains("params_seed")) e.params_seed = j.at("params_seed").get<std::uint64_t>();
    if (j.contains("params")) e.params_path = resolve(base, j.at("params").get<std::string>());
    if (e.half_life <= 0.0) throw ConfigError("half_life must be positive");
    if (e.noise_sd < 0.0) throw ConfigError("noise_sd must be non-negative");
  } else if (e.backend == "table") {
    e.table_path = resolve(base, j.at("path").get<std::string>());
    e.missing = parse_missing_policy(j.value("missing", std::string("error")));
    read_optional(j, "default", e.default_score);
  } else {
    throw ConfigError("unknown evaluator backend '" + e.backend + "'");
  }
  return e;
}

json evaluator_to_json(const EvaluatorConfig& e) {
  if (e.backend == "table") {
    return {{"backend", "table"},
            {"path", e.table_path.string()},
            {"missing", e.missing == MissingPolicy::error     ? "error"
                        : e.missing == MissingPolicy::nearest ? "nearest"
                                                              : "default"},
            {"default", e.default_score}};
  }
  json j = {{"backend", "surrogate"},
            {"coupling", e.coupling},
            {"half_life", e.half_life},
            {"noise_sd", e.noise_sd}};
  if (e.params_seed) j["params_seed"] = *e.params_seed;
  if (!e.params_path.empty()) j["params"] = e.params_path.string();
  return j;
}

// Appends JSON lines and remembers how many bytes are committed.
class JsonlWriter {
 public:
  JsonlWriter(fs::path path, std::uint64_t keep_bytes) : path_(std::move(path)) {
    if (fs::exists(path_)) {
      if (fs::file_size(path_) < keep_bytes) {
        throw ConfigError(path_.string() + " is shorter than its checkpoint offset");
      }
      fs::resize_file(path_, keep_bytes);
    } else if (keep_bytes > 0) {
      throw ConfigError(path_.string() + " is missing but the checkpoint expects it");
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw ConfigError("cannot write " + path_.string());
    offset_ = keep_bytes;
  }

  void write(const json& record) {
    const auto line = record.dump() + '\n';
    out_ << line;
    offset_ += line.size();
  }

  std::uint64_t commit() {
    out_.flush();
    if (!out_) throw Error("write to " + path_.string() + " failed");
    return offset_;
  }

 private:
  fs::path path_;
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

class ShrinkFileSink final : public ShrinkSink {
 public:
  ShrinkFileSink(JsonlWriter& evals, JsonlWriter& reports) : evals_(evals), reports_(reports) {}

  void on_eval(int step, int slot, const EvalRecord& record) override {
    evals_.write({{"phase", "shrink"},
                  {"step", step},
                  {"slot", slot},
                  {"arch", record.key},
                  {"score", record.score}});
  }

  void on_report(const ShrinkReport& report) override {
    for (const auto& r : report_records(report)) reports_.write(r);
  }

 private:
  JsonlWriter& evals_;
  JsonlWriter& reports_;
};

class EvolutionFileSink final : public EvolutionSink {
 public:
  EvolutionFileSink(JsonlWriter& evals, JsonlWriter& iterations, std::ostream* log)
      : evals_(evals), iterations_(iterations), log_(log) {}

  void on_eval(int iteration, int slot, const EvalRecord& record) override {
    evals_.write({{"phase", "evolve"},
                  {"iteration", iteration},
                  {"slot", slot},
                  {"arch", record.key},
                  {"score", record.score}});
  }

  void on_iteration(const IterationStats& s) override {
    const bool any = s.evaluated > 0;
    iterations_.write({{"iteration", s.iteration},
                       {"evaluated", s.evaluated},
                       {"best", any ? json(s.best) : json(nullptr)},
                       {"mean", any ? json(s.mean) : json(nullptr)},
                       {"worst", any ? json(s.worst) : json(nullptr)},
                       {"best_ever", s.best_ever},
                       {"best_ever_arch", s.best_ever_arch}});
    evals_.commit();
    iterations_.commit();
    if (log_) {
      *log_ << "iteration " << s.iteration << ": " << s.evaluated << " evaluated, best ever "
            << s.best_ever << '\n';
    }
  }

 private:
  JsonlWriter& evals_;
  JsonlWriter& iterations_;
  std::ostream* log_;
};

// Thrown from the round callback to emulate a kill after a checkpoint.
struct Interrupted {};

void prepare_output(const fs::path& dir, bool overwrite) {
  fs::create_directories(dir);
  const bool empty = fs::directory_iterator(dir) == fs::directory_iterator();
  if (empty) return;
  if (!overwrite) {
    throw ConfigError("output directory " + dir.string() +
                      " is not empty; pass --overwrite or --resume");
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    const bool ours = name == kEvals || name == kReports || name == kEvolution ||
                      name == kCheckpoint || name == kGraph || name == kBest ||
                      (name.starts_with("graph_step") && name.ends_with(".json"));
    if (ours) fs::remove(entry.path());
  }
}

EvolutionResult run_evolution_phase(const RunConfig& config, const OperationGraph& graph,
                                    const Evaluator& evaluator, JsonlWriter& evals,
                                    std::ostream* log) {
  JsonlWriter iterations(config.output_dir / kEvolution, 0);
  EvolutionFileSink sink(evals, iterations, log);
  auto result = evolve(config.space, graph, config.evolution, evaluator,
                       Rng::stream(config.seed, "evolution"),
                       Rng::stream(config.seed, "evolution-noise"), &sink, config.workers);
  evals.commit();
  iterations.commit();
  write_json_file(config.output_dir / kBest, best_to_json(config.space, result.best, evaluator));
  return result;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  try {
    RunConfig config;
    if (!j.contains("seed")) throw ConfigError("run config needs a seed");
    config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("space")) {
      const auto& s = j.at("space");
      if (s.is_string()) {
        const auto name = s.get<std::string>();
        config.space = name == "default" ? build_default_space(j.value("n_class", 1000))
                                         : load_space(resolve(base_dir, name));
      } else {
        config.space = space_from_json(s);
      }
    }
    if (j.contains("schedule")) config.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("evolution")) config.evolution = evolution_from_json(j.at("evolution"));
    if (j.contains("evaluator")) config.evaluator = evaluator_from_json(j.at("evaluator"), base_dir);
    if (j.contains("output_dir")) {
      config.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    }
    read_optional(j, "workers", config.workers);
    if (config.workers < 1) throw ConfigError("workers must be positive");
    return config;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json_file(path), path.parent_path());
}

json run_config_to_json(const RunConfig& c) {
  json evolution = {{"population", c.evolution.population},
                    {"iterations", c.evolution.iterations},
                    {"elite_k", c.evolution.elite_k},
                    {"mutation_prob", c.evolution.mutation_prob},
                    {"offspring_crossover", c.evolution.offspring_crossover},
                    {"offspring_mutation", c.evolution.offspring_mutation},
                    {"max_resample", c.evolution.max_resample},
                    {"hall_of_fame", c.evolution.hall_of_fame}};
  if (c.evolution.flops_max) evolution["flops_max"] = *c.evolution.flops_max;
  if (c.evolution.flops_min) evolution["flops_min"] = *c.evolution.flops_min;
  return {{"seed", c.seed},
          {"space", space_to_json(c.space)},
          {"schedule",
           {{"t_first", c.schedule.t_first},
            {"t_interval", c.schedule.t_interval},
            {"retention", c.schedule.retention},
            {"test_factor", c.schedule.test_factor}}},
          {"evolution", evolution},
          {"evaluator", evaluator_to_json(c.evaluator)},
          {"output_dir", c.output_dir.string()},
          {"workers", c.workers}};
}

void apply_environment(RunConfig& config) {
  if (const char* dir = std::getenv("BSNAS_OUTPUT_DIR"); dir && *dir) config.output_dir = dir;
  if (const char* workers = std::getenv("BSNAS_WORKERS"); workers && *workers) {
    try {
      config.workers = std::stoi(workers);
    } catch (const std::exception&) {
      throw ConfigError(std::string("BSNAS_WORKERS is not an integer: ") + workers);
    }
    if (config.workers < 1) throw ConfigError("BSNAS_WORKERS must be positive");
  }
}

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config) {
  const auto& e = config.evaluator;
  if (e.backend == "table") {
    return std::make_unique<TableEvaluator>(
        TableEvaluator::load(e.table_path, e.missing, e.default_score));
  }
  SurrogateParams params;
  if (!e.params_path.empty()) {
    try {
      params = read_json_file(e.params_path).get<SurrogateParams>();
    } catch (const json::exception& ex) {
      throw ConfigError(e.params_path.string() + ": " + ex.what());
    }
  } else {
    params = SurrogateParams::generate(config.space, e.params_seed.value_or(config.seed),
                                       e.coupling, e.half_life, e.noise_sd);
  }
  return std::make_unique<SurrogateEvaluator>(config.space, std::move(params));
}

json checkpoint_to_json(const Checkpoint& c) {
  return {{"seed", c.seed},
          {"round", c.state.round},
          {"graph", graph_to_json(c.state.graph)},
          {"sampling", rng_to_json(c.state.sampling)},
          {"noise", rng_to_json(c.state.noise)},
          {"evaluations", c.state.evaluations},
          {"evaluator_state", c.evaluator_state},
          {"stream_offsets", c.stream_offsets}};
}

Checkpoint checkpoint_from_json(const SearchSpace& space, const json& j) {
  try {
    Checkpoint c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.state.graph = graph_from_json(space, j.at("graph"));
    c.state.round = j.at("round").get<int>();
    c.state.sampling = rng_from_json(j.at("sampling"));
    c.state.noise = rng_from_json(j.at("noise"));
    c.state.evaluations = j.at("evaluations").get<std::uint64_t>();
    c.evaluator_state = j.value("evaluator_state", json(nullptr));
    if (j.contains("stream_offsets")) j.at("stream_offsets").get_to(c.stream_offsets);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const SearchSpace& space, const fs::path& path) {
  return checkpoint_from_json(space, read_json_file(path));
}

json best_to_json(const SearchSpace& space, const EvalRecord& best, const Evaluator& evaluator) {
  auto released = release_spring_blocks(space, best.arch);
  json j = {{"arch", best.key},
            {"mode", "released"},
            {"score", best.score},
            {"macs", flops(space, released).total_macs},
            {"params", params(space, released)}};
  if (const auto* s = dynamic_cast<const SurrogateEvaluator*>(&evaluator)) {
    j["true_fitness"] = s->true_fitness(best.arch);
  }
  return j;
}

PipelineSummary run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  config.schedule.validate();
  config.evolution.validate();
  auto evaluator = make_evaluator(config);
  const auto checkpoint_path = config.output_dir / kCheckpoint;

  ShrinkState state = ShrinkState::fresh(config.space, config.seed);
  std::map<std::string, std::uint64_t> offsets;
  if (options.resume && fs::exists(checkpoint_path)) {
    auto checkpoint = load_checkpoint(config.space, checkpoint_path);
    if (checkpoint.seed != config.seed) {
      throw ConfigError("checkpoint was written with seed " + std::to_string(checkpoint.seed) +
                        ", config has " + std::to_string(config.seed));
    }
    state = std::move(checkpoint.state);
    evaluator->load_state(checkpoint.evaluator_state);
    offsets = std::move(checkpoint.stream_offsets);
    if (options.log) *options.log << "resuming before round " << state.round + 1 << '\n';
  } else {
    prepare_output(config.output_dir, options.overwrite || options.resume);
  }

  JsonlWriter evals(config.output_dir / kEvals, offsets[kEvals]);
  JsonlWriter reports(config.output_dir / kReports, offsets[kReports]);
  ShrinkFileSink sink(evals, reports);

  auto checkpoint_round = [&](const ShrinkState& s) {
    Checkpoint c;
    c.seed = config.seed;
    c.state = s;
    c.evaluator_state = evaluator->save_state();
    c.stream_offsets = {{kEvals, evals.commit()}, {kReports, reports.commit()}};
    const auto j = checkpoint_to_json(c);
    write_json_file(config.output_dir / ("graph_step" + std::to_string(s.round) + ".json"), j);
    write_json_file(checkpoint_path, j);
    if (options.log) {
      *options.log << "round " << s.round << " done: " << alive_cardinality(s.graph)
                   << " alive architectures\n";
    }
    if (options.stop_after_round && s.round == *options.stop_after_round) throw Interrupted{};
  };

  PipelineSummary summary;
  try {
    auto result = run_shrinking(config.space, config.schedule, *evaluator, state, &sink,
                                config.workers, checkpoint_round);
    summary.reports = std::move(result.reports);
  } catch (const Interrupted&) {
    summary.graph = state.graph;
    summary.interrupted = true;
    return summary;
  }
  summary.graph = state.graph;

  Checkpoint final_state;
  final_state.seed = config.seed;
  final_state.state = state;
  final_state.evaluator_state = evaluator->save_state();
  final_state.stream_offsets = {{kEvals, evals.commit()}, {kReports, reports.commit()}};
  write_json_file(config.output_dir / kGraph, checkpoint_to_json(final_state));

  if (options.run_evolution) {
    summary.evolution = run_evolution_phase(config, state.graph, *evaluator, evals, options.log);
  }
  return summary;
}

EvolutionResult run_evolution_from_checkpoint(const RunConfig& config, const fs::path& checkpoint,
                                              bool overwrite) {
  auto c = load_checkpoint(config.space, checkpoint);
  auto evaluator = make_evaluator(config);
  evaluator->load_state(c.evaluator_state);
  fs::create_directories(config.output_dir);
  for (const char* name : {kEvals, kEvolution, kBest}) {
    const auto path = config.output_dir / name;
    if (!fs::exists(path)) continue;
    if (!overwrite) throw ConfigError(path.string() + " exists; pass --overwrite");
    fs::remove(path);
  }
  JsonlWriter evals(config.output_dir / kEvals, 0);
  return run_evolution_phase(config, c.state.graph, *evaluator, evals, nullptr);
}

DistributionReport distribution_report(const SearchSpace& space,
                                       const std::vector<DistributionInput>& inputs,
                                       Evaluator& evaluator, int n_samples, Rng rng, Rng noise) {
  if (n_samples < 0) throw ConfigError("sample count must be non-negative");
  DistributionReport report;
  std::uint64_t index = 0;
  for (const auto& input : inputs) {
    try {
      input.graph.check_feasible();
    } catch (const InfeasibleError& e) {
      report.warnings.push_back("skipping " + input.label + ": " + e.what());
      continue;
    }
    evaluator.load_state(input.evaluator_state);
    std::vector<Architecture> archs;
    archs.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) archs.push_back(random_architecture(space, rng, &input.graph));
    const auto scores = evaluate_batch(evaluator, archs, noise, index);
    index += archs.size();

    DistributionSummary s;
    s.step = input.label;
    s.samples = archs.size();
    if (!scores.empty()) {
      s.mean = mean(scores);
      s.min = *std::min_element(scores.begin(), scores.end());
      s.max = *std::max_element(scores.begin(), scores.end());
    }
    report.summary.push_back(s);
    for (std::size_t i = 0; i < archs.size(); ++i) {
      report.rows.push_back({input.label, static_cast<int>(i), archs[i].canonical(), scores[i]});
    }
  }
  return report;
}

json control_training_state(const SearchSpace& space, Evaluator& evaluator, double epochs) {
  const auto saved = evaluator.save_state();
  if (auto* s = dynamic_cast<SurrogateEvaluator*>(&evaluator)) s->reset_training();
  evaluator.notify_training(OperationGraph(space), epochs);
  auto state = evaluator.save_state();
  evaluator.load_state(saved);
  return state;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

void write_distribution_csv(std::ostream& out, const DistributionReport& report) {
  out << "step,sample_index,arch,score\n";
  for (const auto& row : report.rows) {
    out << csv_field(row.step) << ',' << row.sample_index << ',' << csv_field(row.arch) << ','
        << format_double(row.score) << '\n';
  }
}

RankReport rank_correlation(const std::vector<EvalRecord>& evals,
                            const std::function<double(const Architecture&)>& truth, int top_n) {
  if (top_n < 3) throw ConfigError("top_n must be at least 3");
  std::set<std::string> seen_keys;
  std::set<double> seen_scores;
  std::vector<EvalRecord> distinct;
  for (const auto& r : evals) {
    if (!seen_keys.insert(r.key).second) continue;
    if (!seen_scores.insert(r.score).second) continue;
    distinct.push_back(r);
  }
  if (distinct.size() < 3) {
    throw ContractViolation("rank correlation needs at least 3 architectures with distinct scores, got " +
                            std::to_string(distinct.size()));
  }
  sort_records(distinct);

  const auto m = distinct.size();
  const auto n = std::min<std::size_t>(m, static_cast<std::size_t>(top_n));
  RankReport report;
  std::vector<double> estimates, truths;
  for (std::size_t i = 0; i < n; ++i) {
    // Evenly spaced positions, rounded; strictly increasing since n <= m.
    const auto pos = n == 1 ? 0 : (i * (m - 1) * 2 + (n - 1)) / (2 * (n - 1));
    const auto& r = distinct[pos];
    const double t = truth(r.arch);
    report.selected.push_back({r.key, r.score, t});
    estimates.push_back(r.score);
    truths.push_back(t);
  }
  report.spearman = spearman(estimates, truths);
  report.kendall = kendall_tau(estimates, truths);
  return report;
}

json rank_report_to_json(const RankReport& report) {
  json selected = json::array();
  for (const auto& e : report.selected) {
    selected.push_back({{"arch", e.arch}, {"estimate", e.estimate}, {"truth", e.truth}});
  }
  return {{"count", report.selected.size()},
          {"spearman", report.spearman},
          {"kendall", report.kendall},
          {"selected", selected}};
}

void write_rank_csv(std::ostream& out, const RankReport& report) {
  out << "arch,estimate,truth\n";
  for (const auto& e : report.selected) {
    out << csv_field(e.arch) << ',' << format_double(e.estimate) << ',' << format_double(e.truth)
        << '\n';
  }
}

std::vector<EvalRecord> read_eval_records(std::istream& in, const std::string& phase) {
  std::vector<EvalRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (!phase.empty() && j.value("phase", std::string()) != phase) continue;
      records.push_back(make_record(Architecture::parse(j.at("arch").get<std::string>()),
                                    j.at("score").get<double>()));
    } catch (const json::exception& e) {
      throw ConfigError("evals line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace bsnas
