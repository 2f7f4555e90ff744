#include "looptune/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

namespace looptune {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalSpecError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << data;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

std::string replace_all(std::string text, std::string_view from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

// Last non-empty line, capped at 200 bytes.
std::string summary_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  }
  if (last.size() > 200) last.resize(200);
  return last;
}

}  // namespace

void EvalSpec::check() const {
  if (run.empty()) throw EvalSpecError("eval spec needs a run command");
  if (!(timeout_seconds > 0.0)) throw EvalSpecError("timeout must be positive");
  if (repeats < 1) throw EvalSpecError("repeats must be at least 1");
  if (metric.mode == MetricMode::stdout_regex && metric.pattern.empty())
    throw EvalSpecError("metric mode stdout_regex needs a pattern");
  if (!metric.pattern.empty()) {
    try {
      std::regex re(metric.pattern);
    } catch (const std::regex_error& e) {
      throw EvalSpecError("bad metric pattern '" + metric.pattern + "': " + e.what());
    }
  }
}

EvalSpec parse_eval_spec(const nlohmann::json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw EvalSpecError("eval spec must be a JSON object");
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  EvalSpec spec;
  spec.spec_dir = base_dir;
  try {
    if (doc.contains("space")) spec.space = resolve(doc.at("space").get<std::string>());
    spec.template_path = resolve(doc.at("template").get<std::string>());
    spec.compile = doc.value("compile", std::string{});
    spec.run = doc.at("run").get<std::string>();
    if (doc.contains("metric")) {
      const auto& m = doc.at("metric");
      if (m.is_string()) {
        spec.metric.mode = parse_metric_mode(m.get<std::string>());
      } else {
        spec.metric.mode = parse_metric_mode(m.value("mode", std::string{"stdout_last_number"}));
        spec.metric.pattern = m.value("pattern", std::string{});
      }
    }
    spec.timeout_seconds = doc.value("timeout_seconds", spec.timeout_seconds);
    spec.repeats = doc.value("repeats", spec.repeats);
    if (doc.contains("env")) spec.env = doc.at("env").get<std::map<std::string, std::string>>();
    spec.source_extension =
        doc.value("source_extension", spec.template_path.extension().string());
  } catch (const nlohmann::json::exception& e) {
    throw EvalSpecError(std::string("malformed eval spec: ") + e.what());
  }
  spec.check();
  return spec;
}

EvalSpec load_eval_spec(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw EvalSpecError("cannot parse '" + path.string() + "': " + e.what());
  }
  return parse_eval_spec(doc, fs::absolute(path).parent_path());
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string content_digest(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

SourceRunner::SourceRunner(EvalSpec spec, fs::path workdir)
    : spec_(std::move(spec)), workdir_(fs::absolute(std::move(workdir))) {
  spec_.check();
  fs::create_directories(workdir_ / "generated");
  fs::create_directories(workdir_ / "logs");
}

fs::path SourceRunner::source_path(const std::string& stem) const {
  return workdir_ / "generated" / (stem + spec_.source_extension);
}

std::string SourceRunner::expand(const std::string& command, const fs::path& source,
                                 const fs::path& binary) const {
  std::string out = replace_all(command, "{source}", shell_quote(source.string()));
  out = replace_all(out, "{binary}", shell_quote(binary.string()));
  out = replace_all(out, "{spec_dir}", shell_quote(spec_.spec_dir.string()));
  return replace_all(out, "{workdir}", shell_quote(workdir_.string()));
}

void SourceRunner::write_log(const std::string& name, const std::string& data) const {
  write_text(workdir_ / "logs" / name, data);
}

void SourceRunner::observe(const TrialRecord& trial) {
  if (trial.ok() && (!worst_ok_ || trial.metric > *worst_ok_)) worst_ok_ = trial.metric;
}

TrialRecord SourceRunner::run(const std::string& text, const std::string& stem, int repeats) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord trial;

  const fs::path source = source_path(stem);
  const fs::path binary = workdir_ / "generated" / (stem + ".bin");
  write_text(source, text);

  auto finish = [&](TrialStatus status, const CommandResult& last) {
    trial.status = status;
    trial.stdout_digest = content_digest(last.out);
    trial.stderr_digest = content_digest(last.err);
    trial.elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (status != TrialStatus::ok) trial.metric = penalty();
    observe(trial);
    return trial;
  };

  if (!spec_.compile.empty()) {
    const CommandResult built = run_command(expand(spec_.compile, source, binary), workdir_,
                                            spec_.env, spec_.timeout_seconds);
    write_log(stem + ".compile.log", built.out + built.err);
    if (built.timed_out) {
      trial.message = "compile timed out";
      return finish(TrialStatus::timeout, built);
    }
    if (!built.success()) {
      trial.message = summary_line(built.err);
      return finish(TrialStatus::compile_fail, built);
    }
  }

  double best = std::numeric_limits<double>::infinity();
  CommandResult ran;
  for (int k = 0; k < std::max(1, repeats); ++k) {
    ran = run_command(expand(spec_.run, source, binary), workdir_, spec_.env,
                      spec_.timeout_seconds);
    const std::string tag = stem + ".run" + std::to_string(k);
    write_log(tag + ".out", ran.out);
    write_log(tag + ".err", ran.err);
    if (ran.timed_out) {
      trial.message = "run timed out";
      return finish(TrialStatus::timeout, ran);
    }
    if (!ran.success()) {
      trial.message = ran.signal ? "killed by signal " + std::to_string(ran.signal)
                                 : "exit status " + std::to_string(ran.exit_code);
      return finish(TrialStatus::run_fail, ran);
    }
    const auto metric = parse_metric(spec_.metric, ran.out, ran.elapsed);
    if (!metric) {
      trial.message = "no metric in program output";
      return finish(TrialStatus::run_fail, ran);
    }
    best = std::min(best, *metric);
  }
  trial.metric = best;
  return finish(TrialStatus::ok, ran);
}

Evaluator::Evaluator(const ParamSpace& space, EvalSpec spec, fs::path workdir)
    : space_(space),
      runner_(std::move(spec), std::move(workdir)),
      template_(read_text(runner_.spec().template_path), space) {}

std::string Evaluator::file_stem(const Configuration& cfg) const {
  return content_digest(describe(cfg, space_));
}

fs::path Evaluator::source_path(const Configuration& cfg) const {
  return runner_.source_path(file_stem(cfg));
}

TrialRecord Evaluator::evaluate(const Configuration& cfg) {
  return evaluate(cfg, runner_.spec().repeats);
}

TrialRecord Evaluator::evaluate(const Configuration& cfg, int repeats) {
  TrialRecord trial = runner_.run(template_.instantiate(cfg), file_stem(cfg), repeats);
  trial.configuration = cfg;
  return trial;
}

}  // namespace looptune
