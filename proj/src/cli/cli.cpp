#include "looptune/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>

#include "commands.hpp"
#include "looptune/evaluator.hpp"
#include "looptune/perfdb.hpp"
#include "looptune/space.hpp"
#include "looptune/treespace.hpp"

namespace looptune {

namespace cli {

void write_json_file(const fs::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("cannot parse '" + path.string() + "': " + e.what());
  }
}

void emit(Streams io, const nlohmann::ordered_json& doc) { io.out << doc.dump() << std::endl; }

}  // namespace cli

namespace {

int report_error(cli::Streams io, const std::string& message, int code) {
  io.err << "looptune: error: " << message << '\n';
  nlohmann::ordered_json doc;
  doc["error"] = message;
  doc["exit_code"] = code;
  cli::emit(io, doc);
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  cli::Streams io{out, err};
  CLI::App app{"Autotuning of loop-optimization pragmas and program parameters", "looptune"};
  app.require_subcommand(1);

  std::function<int()> action;

  cli::TuneOptions tune;
  auto* tune_cmd = app.add_subcommand("tune", "Bayesian-optimization search over a parameter space");
  tune_cmd->add_option("--space", tune.space, "Parameter space JSON (default: the eval spec's)");
  tune_cmd->add_option("--eval-spec", tune.eval_spec, "Evaluation spec JSON")->required();
  tune_cmd->add_option("--out", tune.out, "Run directory")->required();
  tune_cmd->add_option("--max-evals", tune.max_evals, "Maximum number of evaluations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--learner", tune.learner, "Surrogate: RF, ET, GBRT or GP")
      ->capture_default_str();
  tune_cmd->add_option("--kappa", tune.kappa, "LCB exploration weight")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--seed", tune.seed, "Sampler seed (default: the space's seed)");
  tune_cmd->add_option("--eval-timeout-minutes", tune.timeout_minutes,
                       "Per-command timeout in minutes (default: the eval spec's)")
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--evaluator", tune.evaluator, "Evaluation backend")->capture_default_str();
  tune_cmd->add_option("--batch-size", tune.batch_size, "Candidates scored per iteration")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--n-init", tune.n_init, "Initial random evaluations")
      ->check(CLI::PositiveNumber);
  tune_cmd->add_flag("--resume", tune.resume, "Continue a run directory that already has results");
  tune_cmd->add_flag("-q,--quiet", tune.quiet, "Print only the summary");
  tune_cmd->callback([&] { action = [&] { return cli::cmd_tune(tune, io); }; });

  cli::MctreeOptions mc;
  auto* mctree_cmd = app.add_subcommand("mctree", "Search over stacked loop transformations");
  auto* autotune_cmd = mctree_cmd->add_subcommand("autotune", "Run the tree search");
  mctree_cmd->require_subcommand(1);
  autotune_cmd->add_option("--source", mc.source, "Source file with loop id pragmas");
  autotune_cmd->add_option("--loops", mc.loops, "Loop annotation JSON")->required();
  autotune_cmd->add_option("--out", mc.out, "Run directory")->required();
  autotune_cmd->add_option("--eval-spec", mc.eval_spec,
                           "Evaluation spec JSON; its template is the source file");
  autotune_cmd->add_option("--run", mc.run, "Run command")->capture_default_str();
  autotune_cmd->add_option("--timeout", mc.timeout_seconds, "Per-command timeout in seconds")
      ->check(CLI::PositiveNumber);
  autotune_cmd->add_flag("--keep", mc.keep, "Keep generated sources and binaries");
  autotune_cmd->add_option("--tile-choices", mc.tile_choices,
                           "Tile sizes to try (default: the eval spec's, else 2,4)")
      ->delimiter(',');
  autotune_cmd->add_option("--budget", mc.budget, "Valid evaluations to collect")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  autotune_cmd->add_option("--max-depth", mc.max_depth, "Transformations per stack")
      ->capture_default_str();
  autotune_cmd->add_option("--max-band", mc.max_band,
                           "Most loops a single tiling or interchange may target")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  autotune_cmd->add_option("--seed", mc.seed, "Search seed")->capture_default_str();
  autotune_cmd->add_option("--metric", mc.metric, "Metric mode")->capture_default_str();
  autotune_cmd->add_option("--metric-pattern", mc.metric_pattern, "Metric regex");
  autotune_cmd->add_option("--env", mc.env, "Extra environment KEY=VALUE");
  autotune_cmd->add_option("--repeats", mc.repeats, "Runs per experiment")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  autotune_cmd->add_flag("-q,--quiet", mc.quiet, "Print only the summary");
  autotune_cmd->add_option("command", mc.command, "Compile command");
  autotune_cmd->callback([&] { action = [&] { return cli::cmd_mctree(mc, io); }; });

  cli::AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Best configuration and convergence data");
  analyze_cmd->add_option("run_dir", analyze.run_dirs, "Run directories")->required();
  analyze_cmd->add_option("--plot", analyze.plot, "Write the convergence series as TSV");
  analyze_cmd->add_option("--rerun-repeats", analyze.rerun_repeats,
                          "Re-run the best configuration this many times")
      ->check(CLI::PositiveNumber);
  analyze_cmd->callback([&] { action = [&] { return cli::cmd_analyze(analyze, io); }; });

  cli::SpaceOptions space;
  auto* space_cmd = app.add_subcommand("space", "Inspect a parameter space file");
  space_cmd->require_subcommand(1);
  auto* validate_cmd = space_cmd->add_subcommand("validate", "Check the space invariants");
  validate_cmd->add_option("file", space.file, "Space JSON")->required();
  validate_cmd->callback([&] {
    space.action = "validate";
    action = [&] { return cli::cmd_space(space, io); };
  });
  auto* count_cmd = space_cmd->add_subcommand("count", "Product and exact cardinality");
  count_cmd->add_option("file", space.file, "Space JSON")->required();
  count_cmd->callback([&] {
    space.action = "count";
    action = [&] { return cli::cmd_space(space, io); };
  });
  auto* sample_cmd = space_cmd->add_subcommand("sample", "Distinct seeded valid configurations");
  sample_cmd->add_option("file", space.file, "Space JSON")->required();
  sample_cmd->add_option("n", space.count, "Number of configurations")->required();
  sample_cmd->add_option("--seed", space.seed, "Sampler seed (default: the space's seed)");
  sample_cmd->callback([&] {
    space.action = "sample";
    action = [&] { return cli::cmd_space(space, io); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    return report_error(io, e.what(), kExitUsage);
  }

  try {
    return action();
  } catch (const cli::UsageError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const SpaceError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const EvalSpecError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const TemplateError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const DbError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const LoopShapeError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const TreeSearchError& e) {
    return report_error(io, e.what(), kExitUsage);
  } catch (const std::exception& e) {
    return report_error(io, e.what(), 1);
  }
}

}  // namespace looptune
