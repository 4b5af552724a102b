// bsnas: command line front end for the search space, cost model, shrinking
// and evolutionary search.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or input
// error, 3 infeasible request, 4 evaluator failure.

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>

#include "bsnas/brute_force.hpp"
#include "bsnas/cost_model.hpp"
#include "bsnas/errors.hpp"
#include "bsnas/orchestrator.hpp"
#include "bsnas/space_io.hpp"
#include "bsnas/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bsnas;

namespace {

struct SpaceArgs {
  std::string space_path;
  int n_class = 1000;

  [[nodiscard]] SearchSpace load() const {
    return space_path.empty() ? build_default_space(n_class) : load_space(space_path);
  }
};

void add_space_args(CLI::App* cmd, SpaceArgs& args) {
  cmd->add_option("--space", args.space_path, "Space definition JSON (default: built-in space)");
  cmd->add_option("--n-class", args.n_class, "Classifier width of the built-in space");
}

RunConfig load_config(const std::string& path) {
  auto config = load_run_config(path);
  apply_environment(config);
  return config;
}

void print_summary(const SearchSpace& space) {
  std::cout << "input " << space.input_size() << "x" << space.input_size() << "x"
            << space.input_channels() << ", " << space.n_class() << " classes\n";
  std::cout << "searchable layers " << space.layer_count() << ", clusters "
            << space.cluster_count() << "\n";
  for (int c = 0; c < space.cluster_count(); ++c) {
    const auto& cl = space.clusters()[c];
    std::cout << "  cluster " << c + 1 << ": n=" << cl.block_count << " s=" << cl.stride
              << " k=" << json(cl.choices.kernel_sizes).dump()
              << " t=" << json(cl.choices.expansion_ratios).dump()
              << " c=" << json(cl.choices.channel_choices).dump() << "\n";
  }
  const auto [lo, hi] = flops_bounds(space);
  std::cout << "cardinality " << cardinality(space) << "\n";
  std::cout << "MACs " << lo << " .. " << hi << "\n";
}

struct Cli {
  CLI::App app{"Channel-searchable supernet: shrinking and evolutionary architecture search"};

  SpaceArgs space_args;
  std::string arch_text;
  std::string mode = "supernet";
  bool per_layer = false;
  bool as_json = false;
  std::uint64_t seed = 0;
  int count = 1;
  std::string checkpoint;
  std::string config_path;
  bool resume = false;
  bool overwrite = false;
  int stop_after = 0;
  std::optional<std::int64_t> flops_max;
  std::optional<std::int64_t> flops_min;
  std::optional<std::uint64_t> seed_override;
  std::string run_dir;
  std::vector<std::string> steps;
  int samples = 100;
  double control_epochs = -1.0;
  std::string out_path;
  int top_n = 20;
  std::string phase;
  std::uint64_t limit = 1'000'000;

  int run(int argc, char** argv);
};

int Cli::run(int argc, char** argv) {
  app.require_subcommand(1);

  // space
  auto* space_cmd = app.add_subcommand("space", "Inspect the search space");
  space_cmd->require_subcommand(1);
  auto* card = space_cmd->add_subcommand("cardinality", "Number of architectures");
  add_space_args(card, space_args);
  card->callback([&] { std::cout << cardinality(space_args.load()) << "\n"; });

  auto* summary = space_cmd->add_subcommand("summary", "Layer table, cardinality, MAC range");
  add_space_args(summary, space_args);
  summary->callback([&] { print_summary(space_args.load()); });

  auto* bounds = space_cmd->add_subcommand("bounds", "Minimum and maximum released MACs");
  add_space_args(bounds, space_args);
  bounds->callback([&] {
    const auto [lo, hi] = flops_bounds(space_args.load());
    std::cout << lo << " " << hi << "\n";
  });

  auto* validate = space_cmd->add_subcommand("validate", "Check an architecture string");
  add_space_args(validate, space_args);
  validate->add_option("arch", arch_text, "Canonical architecture string")->required();
  validate->callback([&] {
    const auto errors = bsnas::validate(space_args.load(), Architecture::parse(arch_text));
    for (const auto& e : errors) std::cout << e << "\n";
    if (errors.empty()) {
      std::cout << "valid\n";
    } else {
      throw ValidationError(std::to_string(errors.size()) + " problem(s)");
    }
  });

  auto* random = space_cmd->add_subcommand("random", "Sample architectures uniformly");
  add_space_args(random, space_args);
  random->add_option("--seed", seed, "Seed");
  random->add_option("--count", count, "How many")->check(CLI::PositiveNumber);
  random->add_option("--graph", checkpoint, "Restrict to the alive part of a checkpoint");
  random->callback([&] {
    const auto space = space_args.load();
    std::optional<OperationGraph> graph;
    if (!checkpoint.empty()) graph = load_checkpoint(space, checkpoint).state.graph;
    auto rng = Rng::stream(seed, "sampling");
    for (int i = 0; i < count; ++i) {
      std::cout << random_architecture(space, rng, graph ? &*graph : nullptr).canonical() << "\n";
    }
  });

  auto* release = space_cmd->add_subcommand("release", "Spring blocks to their chosen width");
  add_space_args(release, space_args);
  release->add_option("arch", arch_text, "Canonical architecture string")->required();
  release->callback([&] {
    const auto space = space_args.load();
    const auto released = release_spring_blocks(space, Architecture::parse(arch_text));
    std::cout << released.canonical() << " (released, " << flops(space, released).total_macs
              << " MACs)\n";
  });

  // flops
  auto* flops_cmd = app.add_subcommand("flops", "MACs and parameters of an architecture");
  add_space_args(flops_cmd, space_args);
  flops_cmd->add_option("arch", arch_text, "Canonical architecture string")->required();
  flops_cmd->add_option("--mode", mode, "supernet or released")
      ->check(CLI::IsMember({"supernet", "released"}));
  flops_cmd->add_flag("--per-layer", per_layer, "Per-layer breakdown");
  flops_cmd->add_flag("--json", as_json, "JSON output");
  flops_cmd->callback([&] {
    const auto space = space_args.load();
    const auto arch = Architecture::parse(arch_text, parse_mode(mode));
    const auto cost = flops(space, arch);
    if (as_json) {
      json j = {{"arch", arch.canonical()},
                {"mode", mode},
                {"macs", cost.total_macs},
                {"params", cost.total_params}};
      if (per_layer) {
        j["layers"] = json::array();
        for (const auto& l : cost.per_layer) {
          j["layers"].push_back({{"label", l.label}, {"macs", l.macs}, {"params", l.params}});
        }
      }
      std::cout << j.dump(2) << "\n";
      return;
    }
    if (per_layer) {
      for (const auto& l : cost.per_layer) {
        std::cout << std::left << std::setw(24) << l.label << std::right << std::setw(14)
                  << l.macs << std::setw(12) << l.params << "\n";
      }
    }
    std::cout << "MACs " << cost.total_macs << " (" << std::fixed << std::setprecision(2)
              << cost.total_macs / 1e6 << "M), params " << cost.total_params << "\n";
  });

  // shrink / pipeline
  auto add_run_args = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config JSON")->required();
    cmd->add_flag("--resume", resume, "Continue from checkpoint.json in the output directory");
    cmd->add_flag("--overwrite", overwrite, "Replace results in the output directory");
    cmd->add_option("--stop-after", stop_after, "Stop after this shrinking round (testing)");
  };
  auto run_pipeline_cmd = [&](bool with_evolution) {
    auto config = load_config(config_path);
    PipelineOptions options;
    options.resume = resume;
    options.overwrite = overwrite;
    options.run_evolution = with_evolution;
    if (stop_after > 0) options.stop_after_round = stop_after;
    options.log = &std::cerr;
    const auto summary = run_pipeline(config, options);
    if (summary.interrupted) {
      std::cout << "stopped after round " << stop_after << "\n";
      return;
    }
    std::cout << "alive architectures: " << alive_cardinality(summary.graph) << "\n";
    if (summary.evolution) {
      std::cout << "best " << summary.evolution->best.key << " score "
                << summary.evolution->best.score << "\n";
    }
    std::cout << "results in " << config.output_dir.string() << "\n";
  };
  auto* shrink = app.add_subcommand("shrink", "Run the shrinking schedule");
  add_run_args(shrink);
  shrink->callback([&] { run_pipeline_cmd(false); });
  auto* pipeline = app.add_subcommand("pipeline", "Shrinking followed by evolutionary search");
  add_run_args(pipeline);
  pipeline->callback([&] { run_pipeline_cmd(true); });

  // evolve
  auto* evolve_cmd = app.add_subcommand("evolve", "Evolutionary search on a shrunk graph");
  evolve_cmd->add_option("--config", config_path, "Run config JSON")->required();
  evolve_cmd->add_option("--checkpoint", checkpoint, "graph.json or checkpoint file")->required();
  evolve_cmd->add_option("--flops-max", flops_max, "Upper MAC bound of the released model");
  evolve_cmd->add_option("--flops-min", flops_min, "Lower MAC bound of the released model");
  evolve_cmd->add_option("--seed", seed_override, "Override the run seed");
  evolve_cmd->add_option("--out", out_path, "Result directory (default: <output_dir>/evolve)");
  evolve_cmd->add_flag("--overwrite", overwrite, "Replace previous results");
  evolve_cmd->callback([&] {
    auto config = load_config(config_path);
    config.output_dir = out_path.empty() ? config.output_dir / "evolve" : fs::path(out_path);
    if (flops_max) config.evolution.flops_max = flops_max;
    if (flops_min) config.evolution.flops_min = flops_min;
    config.evolution.validate();
    auto file_seed = config.seed;
    if (seed_override) config.seed = *seed_override;
    // The evaluator was trained with the file seed's parameters.
    if (!config.evaluator.params_seed) config.evaluator.params_seed = file_seed;
    const auto result = run_evolution_from_checkpoint(config, checkpoint, overwrite);
    std::cout << "best " << result.best.key << " score " << result.best.score << " after "
              << result.evaluations << " evaluations\n";
  });

  // reports
  auto* dist = app.add_subcommand("report-dist", "Accuracy distribution of each shrink step");
  dist->add_option("--config", config_path, "Run config JSON")->required();
  dist->add_option("--run-dir", run_dir, "Directory with graph_step<r>.json (default: output dir)");
  dist->add_option("--steps", steps, "Checkpoint files to compare (default: graph_step*.json)");
  dist->add_option("--samples", samples, "Architectures per step")->check(CLI::NonNegativeNumber);
  dist->add_option("--control-epochs", control_epochs,
                   "Also sample the unshrunk graph trained this long (default: full schedule)");
  dist->add_option("--out", out_path, "CSV path (default: <run-dir>/distribution.csv)");
  dist->callback([&] {
    auto config = load_config(config_path);
    const fs::path dir = run_dir.empty() ? config.output_dir : fs::path(run_dir);
    std::vector<fs::path> files;
    if (steps.empty()) {
      for (int r = 1; r <= config.schedule.rounds(); ++r) {
        const auto p = dir / ("graph_step" + std::to_string(r) + ".json");
        if (fs::exists(p)) files.push_back(p);
      }
    } else {
      files.assign(steps.begin(), steps.end());
    }
    auto evaluator = make_evaluator(config);
    std::vector<DistributionInput> inputs;
    if (control_epochs != 0.0) {
      const double epochs =
          control_epochs > 0.0
              ? control_epochs
              : config.schedule.t_first + (config.schedule.rounds() - 1) * config.schedule.t_interval;
      inputs.push_back({"control", OperationGraph(config.space),
                        control_training_state(config.space, *evaluator, epochs)});
    }
    for (const auto& f : files) {
      auto c = load_checkpoint(config.space, f);
      inputs.push_back({"step" + std::to_string(c.state.round), c.state.graph, c.evaluator_state});
    }
    const auto report =
        distribution_report(config.space, inputs, *evaluator, samples,
                            Rng::stream(config.seed, "report"), Rng::stream(config.seed, "report-noise"));
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    const fs::path out = out_path.empty() ? dir / "distribution.csv" : fs::path(out_path);
    std::ofstream csv(out);
    if (!csv) throw ConfigError("cannot write " + out.string());
    write_distribution_csv(csv, report);
    std::cout << std::left << std::setw(10) << "step" << std::right << std::setw(8) << "n"
              << std::setw(10) << "mean" << std::setw(10) << "min" << std::setw(10) << "max\n";
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& s : report.summary) {
      std::cout << std::left << std::setw(10) << s.step << std::right << std::setw(8) << s.samples
                << std::setw(10) << s.mean << std::setw(10) << s.min << std::setw(10) << s.max
                << "\n";
    }
    std::cout << "wrote " << out.string() << "\n";
  });

  auto* rank = app.add_subcommand("report-rank", "Supernet estimate vs stand-alone fitness");
  rank->add_option("--config", config_path, "Run config JSON")->required();
  rank->add_option("--run-dir", run_dir, "Directory with evals.jsonl (default: output dir)");
  rank->add_option("--top", top_n, "Architectures to compare")->check(CLI::Range(3, 1'000'000));
  rank->add_option("--phase", phase, "Only evaluations of this phase (shrink or evolve)");
  rank->add_option("--out", out_path, "Output prefix (default: <run-dir>/rank)");
  rank->callback([&] {
    auto config = load_config(config_path);
    const fs::path dir = run_dir.empty() ? config.output_dir : fs::path(run_dir);
    auto evaluator = make_evaluator(config);
    const auto* surrogate = dynamic_cast<const SurrogateEvaluator*>(evaluator.get());
    if (surrogate == nullptr) {
      throw ConfigError("report-rank needs the surrogate backend for stand-alone fitness");
    }
    std::ifstream in(dir / "evals.jsonl");
    if (!in) throw ConfigError("cannot open " + (dir / "evals.jsonl").string());
    const auto records = read_eval_records(in, phase);
    const auto report = rank_correlation(
        records, [&](const Architecture& a) { return surrogate->true_fitness(a); }, top_n);
    const std::string prefix = out_path.empty() ? (dir / "rank").string() : out_path;
    write_json_file(prefix + ".json", rank_report_to_json(report));
    std::ofstream csv(prefix + ".csv");
    write_rank_csv(csv, report);
    std::cout << "architectures " << report.selected.size() << ", spearman " << report.spearman
              << ", kendall " << report.kendall << "\n";
  });

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Exhaustive best over a small alive space");
  oracle->add_option("--config", config_path, "Run config JSON")->required();
  oracle->add_option("--checkpoint", checkpoint, "Restrict to the alive part of a checkpoint");
  oracle->add_option("--limit", limit, "Refuse spaces larger than this");
  oracle->callback([&] {
    auto config = load_config(config_path);
    auto evaluator = make_evaluator(config);
    OperationGraph graph(config.space);
    if (!checkpoint.empty()) {
      auto c = load_checkpoint(config.space, checkpoint);
      graph = c.state.graph;
      evaluator->load_state(c.evaluator_state);
    }
    const auto best = brute_force_best(config.space, graph, *evaluator, limit, config.seed);
    std::cout << "best " << best.arch.canonical() << " score " << best.score << " of "
              << best.count << " architectures\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    Cli cli;
    return cli.run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const SpaceTooLargeError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 3;
  } catch (const EvaluatorError& e) {
    std::cerr << "evaluator failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
