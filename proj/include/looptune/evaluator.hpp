#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "looptune/space.hpp"
#include "looptune/subprocess.hpp"
#include "looptune/trial.hpp"

namespace looptune {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvalSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Source text with `#<name>` markers for the parameters of a space. A marker
// is `#` followed by a parameter name not followed by another identifier
// character; when several names match, the longest wins, so `#P10` never
// resolves to P1. Any `#P<digits>` token that names no parameter is an error.
class CodeTemplate {
 public:
  // Throws TemplateError on unknown markers, on parameters without a marker,
  // and when first occurrences are out of declaration order.
  CodeTemplate(std::string text, const ParamSpace& space);

  // Inactive parameters expand to the empty string.
  std::string instantiate(const Configuration& cfg) const;

  const std::string& text() const { return text_; }
  // Template with every marker removed.
  std::string stripped() const;

 private:
  struct Piece {
    std::string literal;
    int param = -1;  // -1 for literal text
  };

  std::string text_;
  std::vector<std::string> names_;
  std::vector<Piece> pieces_;
};

enum class MetricMode { walltime, stdout_last_number, stdout_regex, inverse_stdout };

std::string_view to_string(MetricMode mode);
MetricMode parse_metric_mode(std::string_view text);

struct MetricSpec {
  MetricMode mode = MetricMode::stdout_last_number;
  // Regex for stdout_regex / inverse_stdout. The first capture group (or the
  // whole match without groups) of the last match is parsed as a number.
  // inverse_stdout with no pattern uses the last number on stdout.
  std::string pattern;
};

// Last floating-point token of `text`.
std::optional<double> last_number(std::string_view text);

// Metric from one run's output; std::nullopt when nothing parses.
std::optional<double> parse_metric(const MetricSpec& spec, const std::string& out, double walltime);

struct EvalSpec {
  std::filesystem::path space;
  std::filesystem::path template_path;
  std::string compile;  // empty: the generated source is run directly
  std::string run;
  MetricSpec metric;
  double timeout_seconds = 600.0;
  int repeats = 1;
  std::map<std::string, std::string> env;
  std::string source_extension;  // defaults to the template's extension
  std::filesystem::path spec_dir;  // substituted for {spec_dir} in commands

  void check() const;  // throws EvalSpecError
};

// Relative paths resolve against the spec file's directory. Commands may use
// {source}, {binary}, {workdir} and {spec_dir}.
EvalSpec parse_eval_spec(const nlohmann::json& doc, const std::filesystem::path& base_dir);
EvalSpec load_eval_spec(const std::filesystem::path& path);

// 16 hex digits of FNV-1a 64.
std::string content_digest(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

// Compiles and runs generated sources inside `workdir`. Sources are kept
// under workdir/generated and process output under workdir/logs, both named
// by the caller-supplied stem.
class SourceRunner {
 public:
  SourceRunner(EvalSpec spec, std::filesystem::path workdir);

  // The returned record has an empty configuration.
  TrialRecord run(const std::string& source, const std::string& stem, int repeats);

  // Registers a trial from elsewhere (a resumed run) for penalty tracking.
  void observe(const TrialRecord& trial);
  std::optional<double> worst_ok() const { return worst_ok_; }
  double penalty() const { return penalty_metric(worst_ok_, spec_.timeout_seconds); }

  const EvalSpec& spec() const { return spec_; }
  const std::filesystem::path& workdir() const { return workdir_; }
  std::filesystem::path source_path(const std::string& stem) const;

 private:
  std::string expand(const std::string& command, const std::filesystem::path& source,
                     const std::filesystem::path& binary) const;
  void write_log(const std::string& name, const std::string& data) const;

  EvalSpec spec_;
  std::filesystem::path workdir_;
  std::optional<double> worst_ok_;
};

// Instantiates the spec's template for a configuration and runs it. Files
// are named by a hash of the configuration.
class Evaluator {
 public:
  Evaluator(const ParamSpace& space, EvalSpec spec, std::filesystem::path workdir);

  TrialRecord evaluate(const Configuration& cfg);
  TrialRecord evaluate(const Configuration& cfg, int repeats);

  void observe(const TrialRecord& trial) { runner_.observe(trial); }
  std::optional<double> worst_ok() const { return runner_.worst_ok(); }
  double penalty() const { return runner_.penalty(); }

  const EvalSpec& spec() const { return runner_.spec(); }
  const CodeTemplate& code_template() const { return template_; }
  std::string file_stem(const Configuration& cfg) const;
  std::filesystem::path source_path(const Configuration& cfg) const;

 private:
  const ParamSpace& space_;
  SourceRunner runner_;
  CodeTemplate template_;
};

}  // namespace looptune
