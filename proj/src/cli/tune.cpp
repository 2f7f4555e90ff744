#include <cstdio>

#include "commands.hpp"
#include "looptune/cli.hpp"
#include "looptune/evaluator.hpp"
#include "looptune/optimizer.hpp"
#include "looptune/perfdb.hpp"
#include "looptune/space.hpp"

namespace looptune::cli {

namespace {

std::string progress_line(const ResultRow& row, std::size_t max_evals) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "eval %zu/%zu  %-12s metric=%s  elapsed=%.3fs", row.index,
                max_evals, std::string(to_string(row.status)).c_str(),
                format_double(row.metric).c_str(), row.elapsed);
  return buf;
}

}  // namespace

int cmd_tune(const TuneOptions& o, Streams io) {
  if (o.evaluator != "subprocess")
    throw UsageError("unsupported evaluator backend '" + o.evaluator +
                     "'; only 'subprocess' is available");
  SurrogateKind learner;
  try {
    learner = parse_surrogate_kind(o.learner);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  EvalSpec spec = load_eval_spec(o.eval_spec);
  const fs::path space_path = o.space.empty() ? spec.space : o.space;
  if (space_path.empty())
    throw UsageError("no parameter space: pass --space or set \"space\" in the eval spec");
  const ParamSpace space = load_space(space_path);
  if (o.timeout_minutes) spec.timeout_seconds = *o.timeout_minutes * 60.0;

  SearchSettings settings;
  settings.max_evals = o.max_evals;
  settings.kappa = o.kappa;
  settings.learner = learner;
  settings.batch_size = o.batch_size;
  settings.n_init = o.n_init;
  settings.seed = o.seed.value_or(space.seed());
  settings.failure_penalty = spec.timeout_seconds;
  if (settings.n_init && *settings.n_init > settings.max_evals)
    throw UsageError("--n-init must not exceed --max-evals");

  fs::create_directories(o.out);
  const std::vector<std::string> columns = column_names(space);
  std::optional<PerfDb> db;
  try {
    db.emplace(o.resume ? PerfDb::open(o.out, columns) : PerfDb::create(o.out, columns));
  } catch (const DbError& e) {
    if (o.resume) throw;
    throw UsageError(std::string(e.what()) + "; pass --resume to continue that run");
  }

  const fs::path manifest_path = o.out / "manifest.json";
  if (!fs::exists(manifest_path)) {
    nlohmann::ordered_json manifest;
    manifest["command"] = "tune";
    manifest["space"] = fs::absolute(space_path).string();
    manifest["eval_spec"] = fs::absolute(o.eval_spec).string();
    manifest["run_dir"] = fs::absolute(o.out).string();
    manifest["columns"] = columns;
    nlohmann::ordered_json s;
    s["max_evals"] = settings.max_evals;
    s["learner"] = to_string(settings.learner);
    s["kappa"] = settings.kappa;
    s["seed"] = settings.seed;
    s["batch_size"] = settings.batch_size;
    s["n_init"] = initial_sample_count(settings, space);
    s["timeout_seconds"] = spec.timeout_seconds;
    s["repeats"] = spec.repeats;
    s["evaluator"] = o.evaluator;
    manifest["settings"] = std::move(s);
    manifest["start"] = utc_timestamp();
    write_json_file(manifest_path, manifest);
  }

  Evaluator evaluator(space, spec, o.out);
  std::vector<TrialRecord> prior;
  for (const auto& row : db->rows()) {
    prior.push_back(to_trial(row));
    evaluator.observe(prior.back());
  }
  if (!prior.empty() && !o.quiet)
    io.out << "resuming after " << prior.size() << " recorded evaluations\n";

  SearchHooks hooks;
  hooks.on_trial = [&](const TrialRecord& trial, const SearchState&) {
    const ResultRow row = make_row(db->last_index() + 1, trial, utc_timestamp());
    db->append(row);
    if (!o.quiet) io.out << progress_line(row, settings.max_evals) << '\n' << std::flush;
  };
  hooks.on_skip = [&](const Configuration&, const SearchState& state) {
    if (!o.quiet)
      io.out << "budget " << state.budget_used << "/" << settings.max_evals
             << "  duplicate draw skipped\n";
  };

  const SearchState state = run_search(
      space, [&](const Configuration& cfg) { return evaluator.evaluate(cfg); }, settings, hooks,
      prior);

  const auto best = find_min(db->rows());
  nlohmann::ordered_json summary;
  summary["command"] = "tune";
  summary["run_dir"] = fs::absolute(o.out).string();
  summary["learner"] = to_string(settings.learner);
  summary["evaluations"] = db->rows().size();
  summary["budget_used"] = state.budget_used;
  summary["skipped"] = state.skipped;
  summary["exhausted"] = state.exhausted;
  if (best) {
    summary["best_index"] = best->index;
    summary["best_metric"] = best->metric;
    summary["configuration"] = to_json(best->configuration, space);
  } else {
    summary["best_index"] = nullptr;
    summary["best_metric"] = nullptr;
  }
  nlohmann::ordered_json record = summary;
  record["end"] = utc_timestamp();
  write_json_file(o.out / "summary.json", record);

  if (!best) {
    io.out << "no successful trials\n";
    emit(io, summary);
    return kExitNoSuccess;
  }
  io.out << "best metric " << format_double(best->metric) << " at evaluation " << best->index
         << " of " << db->rows().size() << "\n  " << describe(best->configuration, space) << '\n';
  emit(io, summary);
  return kExitOk;
}

}  // namespace looptune::cli
