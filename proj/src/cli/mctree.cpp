#include <cstdio>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "looptune/cli.hpp"
#include "looptune/evaluator.hpp"
#include "looptune/perfdb.hpp"
#include "looptune/treespace.hpp"

namespace looptune::cli {

namespace {

const std::vector<std::string> kColumns = {"depth", "pragmas"};

bool needs_quoting(const std::string& word) {
  if (word.empty()) return true;
  for (char c : word) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || std::string_view("-_./=+:,@%{}").find(c) !=
                                                              std::string_view::npos))
      return true;
  }
  return false;
}

// Joins compile words into one shell command. The word naming the source file
// becomes {source}; the output file becomes {binary}.
std::string compile_command(const std::vector<std::string>& words, const fs::path& source) {
  std::vector<std::string> out;
  bool has_binary = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string w = words[i];
    if (w == source.string() || (!source.empty() && fs::path(w) == source)) w = "{source}";
    if (i > 0 && words[i - 1] == "-o" && w.find("{binary}") == std::string::npos) w = "{binary}";
    if (w.find("{binary}") != std::string::npos) has_binary = true;
    out.push_back(needs_quoting(w) ? shell_quote(w) : w);
  }
  if (!has_binary) {
    out.push_back("-o");
    out.push_back("{binary}");
  }
  std::string joined;
  for (const auto& w : out) joined += (joined.empty() ? "" : " ") + w;
  return joined;
}

std::string read_source(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string joined_pragmas(const std::vector<std::pair<std::string, std::string>>& stack) {
  std::string out;
  for (const auto& [pragma, anchor] : stack) out += (out.empty() ? "" : "; ") + pragma;
  return out;
}

}  // namespace

int cmd_mctree(const MctreeOptions& o, Streams io) {
  EvalSpec spec;
  std::vector<int> tile_choices = o.tile_choices;
  if (!o.eval_spec.empty()) {
    spec = load_eval_spec(o.eval_spec);
    const nlohmann::json doc = read_json_file(o.eval_spec);
    if (tile_choices.empty() && doc.contains("tile_choices")) {
      try {
        tile_choices = doc["tile_choices"].get<std::vector<int>>();
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("\"tile_choices\" must be a list of integers: " + std::string(e.what()));
      }
      if (tile_choices.empty()) throw UsageError("\"tile_choices\" must not be empty");
    }
    if (!o.source.empty()) spec.template_path = o.source;
  } else {
    if (o.source.empty()) throw UsageError("pass --source or --eval-spec");
    if (o.command.empty()) throw UsageError("no compile command given");
    spec.template_path = o.source;
    spec.run = o.run;
    spec.metric.mode = parse_metric_mode(o.metric);
    spec.metric.pattern = o.metric_pattern;
    spec.repeats = o.repeats;
    spec.source_extension = o.source.extension().string();
  }
  if (!o.command.empty()) spec.compile = compile_command(o.command, o.source);
  if (o.timeout_seconds) spec.timeout_seconds = *o.timeout_seconds;
  for (const auto& kv : o.env) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--env expects KEY=VALUE, got '" + kv + "'");
    spec.env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  try {
    spec.check();
  } catch (const EvalSpecError& e) {
    throw UsageError(e.what());
  }
  if (tile_choices.empty()) tile_choices = kDefaultTileChoices;
  for (int t : tile_choices)
    if (t < 1) throw UsageError("tile sizes must be positive");

  const std::string source = read_source(spec.template_path);
  const LoopNest nest = load_loop_nest(o.loops);
  for (const auto& root : nest.roots()) insert_pragmas(source, {{"", root.name}});

  fs::create_directories(o.out);
  PerfDb db = PerfDb::create(o.out, kColumns);
  SourceRunner runner(spec, o.out);

  TreeSearchSettings settings;
  settings.budget = o.budget;
  settings.tile_choices = tile_choices;
  settings.max_depth = o.max_depth;
  settings.max_band = o.max_band;
  settings.seed = o.seed;

  nlohmann::ordered_json manifest;
  manifest["command"] = "mctree";
  manifest["source"] = fs::absolute(spec.template_path).string();
  manifest["loops"] = fs::absolute(o.loops).string();
  manifest["run_dir"] = fs::absolute(o.out).string();
  manifest["columns"] = kColumns;
  nlohmann::ordered_json s;
  s["compile"] = spec.compile;
  s["run"] = spec.run;
  s["budget"] = settings.budget;
  s["tile_choices"] = settings.tile_choices;
  s["max_depth"] = settings.max_depth;
  s["max_band"] = settings.max_band;
  s["seed"] = settings.seed;
  s["timeout_seconds"] = spec.timeout_seconds;
  s["keep"] = o.keep;
  manifest["settings"] = std::move(s);
  manifest["start"] = utc_timestamp();
  write_json_file(o.out / "manifest.json", manifest);

  auto experiment = [&](const TransformTree& tree, std::size_t i) {
    const auto stack = tree.stack(i);
    const std::string text = insert_pragmas(source, stack);
    const std::string pragmas = joined_pragmas(stack);
    const std::string stem = content_digest(pragmas);
    TrialRecord trial = runner.run(text, stem, spec.repeats);
    trial.configuration.set("depth", std::to_string(tree.node(i).depth));
    trial.configuration.set("pragmas", pragmas);
    if (!o.keep) {
      std::error_code ec;
      fs::remove(runner.source_path(stem), ec);
      fs::remove(o.out / "generated" / (stem + ".bin"), ec);
    }
    return trial;
  };
  std::size_t valid = 0;
  auto hook = [&](const TransformTree& tree, std::size_t i, const TrialRecord& trial) {
    const ResultRow row = make_row(db.last_index() + 1, trial, utc_timestamp());
    db.append(row);
    if (trial.ok()) ++valid;
    if (o.quiet) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "experiment %zu (valid %zu/%zu) depth %zu  %-12s metric=%s",
                  row.index, valid, settings.budget, tree.node(i).depth,
                  std::string(to_string(trial.status)).c_str(), format_double(trial.metric).c_str());
    io.out << buf << '\n';
    if (!trial.configuration.at("pragmas")->empty())
      io.out << "  " << *trial.configuration.at("pragmas") << '\n';
    io.out << std::flush;
  };

  const TreeSearchResult result = tree_search(nest, experiment, settings, hook);

  const SearchNode& best = result.tree.node(result.best);
  const auto stack = result.tree.stack(result.best);
  nlohmann::ordered_json summary;
  summary["command"] = "mctree";
  summary["run_dir"] = fs::absolute(o.out).string();
  summary["total"] = result.total;
  summary["valid"] = result.valid;
  summary["exhausted"] = result.exhausted;
  summary["baseline_metric"] = result.tree.node(0).metric;
  summary["best_metric"] = best.metric;
  std::size_t best_row = 0;
  for (std::size_t k = 0; k < result.order.size(); ++k)
    if (result.order[k] == result.best) best_row = k + 1;
  summary["best_index"] = best_row;
  nlohmann::ordered_json pragmas = nlohmann::ordered_json::array();
  for (const auto& [pragma, anchor] : stack) pragmas.push_back(pragma);
  summary["best_pragmas"] = std::move(pragmas);
  nlohmann::ordered_json record = summary;
  record["end"] = utc_timestamp();
  write_json_file(o.out / "summary.json", record);

  io.out << "baseline " << format_double(result.tree.node(0).metric) << ", best "
         << format_double(best.metric) << " after " << result.total << " experiments ("
         << result.valid << " valid)\n";
  for (const auto& [pragma, anchor] : stack) io.out << "  " << pragma << '\n';
  emit(io, summary);
  return kExitOk;
}

}  // namespace looptune::cli
