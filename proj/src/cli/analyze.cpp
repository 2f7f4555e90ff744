#include <fstream>

#include "commands.hpp"
#include "looptune/cli.hpp"
#include "looptune/evaluator.hpp"
#include "looptune/perfdb.hpp"
#include "looptune/space.hpp"

namespace looptune::cli {

namespace {

nlohmann::ordered_json configuration_json(const Configuration& cfg,
                                          const std::vector<std::string>& columns) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& name : columns) {
    const auto& value = cfg.at(name);
    doc[name] = value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
  }
  return doc;
}

struct RunView {
  fs::path dir;
  nlohmann::json manifest;
  std::vector<std::string> columns;
  std::vector<ResultRow> rows;
};

RunView load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a directory");
  RunView run;
  run.dir = dir;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw UsageError("'" + dir.string() + "' has no manifest.json; not a run directory");
  run.manifest = read_json_file(manifest_path);
  try {
    run.columns = run.manifest.at("columns").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("manifest.json lacks a column list: " + std::string(e.what()));
  }
  run.rows = load_rows(dir, run.columns);
  if (run.rows.empty()) throw UsageError("'" + dir.string() + "' holds no results");
  return run;
}

double rerun_best(const RunView& run, const Configuration& cfg, int repeats, Streams io) {
  if (run.manifest.value("command", std::string{}) != "tune")
    throw UsageError("--rerun-repeats applies to tune runs only");
  const ParamSpace space = load_space(run.manifest.at("space").get<std::string>());
  EvalSpec spec = load_eval_spec(run.manifest.at("eval_spec").get<std::string>());
  if (run.manifest.contains("settings") && run.manifest["settings"].contains("timeout_seconds"))
    spec.timeout_seconds = run.manifest["settings"]["timeout_seconds"].get<double>();
  Evaluator evaluator(space, spec, run.dir / "rerun");
  const TrialRecord trial = evaluator.evaluate(cfg, repeats);
  if (!trial.ok()) throw UsageError("re-running the best configuration failed: " + trial.message);
  io.out << "rerun: smallest of " << repeats << " runs = " << format_double(trial.metric) << '\n';
  return trial.metric;
}

}  // namespace

int cmd_analyze(const AnalyzeOptions& o, Streams io) {
  if (o.run_dirs.size() > 1) {
    if (!o.plot.empty() || o.rerun_repeats > 0)
      throw UsageError("--plot and --rerun-repeats take a single run directory");
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    bool all_ok = true;
    io.out << "run\tevaluations\tbest_index\tbest_metric\n";
    for (const auto& dir : o.run_dirs) {
      const RunView run = load_run(dir);
      const auto best = find_min(run.rows);
      nlohmann::ordered_json entry;
      entry["run_dir"] = dir.string();
      entry["evaluations"] = run.rows.size();
      entry["best_index"] = best ? nlohmann::ordered_json(best->index) : nullptr;
      entry["best_metric"] = best ? nlohmann::ordered_json(best->metric) : nullptr;
      runs.push_back(entry);
      io.out << dir.string() << '\t' << run.rows.size() << '\t'
             << (best ? std::to_string(best->index) : "-") << '\t'
             << (best ? format_double(best->metric) : "-") << '\n';
      all_ok = all_ok && best.has_value();
    }
    nlohmann::ordered_json doc;
    doc["command"] = "analyze";
    doc["runs"] = std::move(runs);
    emit(io, doc);
    return all_ok ? kExitOk : kExitNoSuccess;
  }

  const RunView run = load_run(o.run_dirs.front());
  if (!o.plot.empty()) {
    std::ofstream tsv(o.plot, std::ios::trunc);
    const auto series = convergence_series(run.rows);
    write_series_tsv(tsv, series);
    if (!tsv) throw UsageError("cannot write '" + o.plot.string() + "'");
    io.out << "wrote " << series.size() << " series points to " << o.plot.string() << '\n';
  }

  nlohmann::ordered_json doc;
  doc["command"] = "analyze";
  doc["run_dir"] = o.run_dirs.front().string();
  doc["evaluations"] = run.rows.size();
  const auto best = find_min(run.rows);
  if (!best) {
    io.out << "no successful trials among " << run.rows.size() << " evaluations\n";
    doc["best_index"] = nullptr;
    doc["best_metric"] = nullptr;
    emit(io, doc);
    return kExitNoSuccess;
  }
  io.out << "best metric " << format_double(best->metric) << " at evaluation " << best->index
         << " of " << run.rows.size() << '\n';
  for (const auto& name : run.columns) {
    const auto& value = best->configuration.at(name);
    io.out << "  " << name << " = " << (value ? "'" + *value + "'" : "<inactive>") << '\n';
  }
  doc["best_index"] = best->index;
  doc["best_metric"] = best->metric;
  doc["configuration"] = configuration_json(best->configuration, run.columns);
  if (o.rerun_repeats > 0)
    doc["rerun_metric"] = rerun_best(run, best->configuration, o.rerun_repeats, io);
  emit(io, doc);
  return kExitOk;
}

}  // namespace looptune::cli
