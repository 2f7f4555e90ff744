#include "looptune/evaluator.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>
#include <string>

namespace looptune {

namespace {

const std::regex& number_regex() {
  static const std::regex re(R"([-+]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][-+]?[0-9]+)?)");
  return re;
}

std::optional<double> to_double(const std::string& token) {
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str()) return std::nullopt;
  return value;
}

std::optional<double> last_capture(const std::string& pattern, const std::string& out) {
  const std::regex re(pattern);
  std::optional<std::string> token;
  for (auto it = std::sregex_iterator(out.begin(), out.end(), re); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    token = m.size() > 1 ? m[1].str() : m[0].str();
  }
  if (!token) return std::nullopt;
  return last_number(*token);
}

}  // namespace

std::string_view to_string(MetricMode mode) {
  switch (mode) {
    case MetricMode::walltime: return "walltime";
    case MetricMode::stdout_last_number: return "stdout_last_number";
    case MetricMode::stdout_regex: return "stdout_regex";
    case MetricMode::inverse_stdout: return "inverse_stdout";
  }
  return "?";
}

MetricMode parse_metric_mode(std::string_view text) {
  if (text == "walltime") return MetricMode::walltime;
  if (text == "stdout_last_number") return MetricMode::stdout_last_number;
  if (text == "stdout_regex") return MetricMode::stdout_regex;
  if (text == "inverse_stdout") return MetricMode::inverse_stdout;
  throw EvalSpecError("unknown metric mode '" + std::string(text) + "'");
}

std::optional<double> last_number(std::string_view text) {
  const std::string s(text);
  std::optional<std::string> token;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number_regex());
       it != std::sregex_iterator(); ++it) {
    token = it->str();
  }
  if (!token) return std::nullopt;
  return to_double(*token);
}

std::optional<double> parse_metric(const MetricSpec& spec, const std::string& out, double walltime) {
  std::optional<double> value;
  switch (spec.mode) {
    case MetricMode::walltime:
      value = walltime;
      break;
    case MetricMode::stdout_last_number:
      value = last_number(out);
      break;
    case MetricMode::stdout_regex:
      value = last_capture(spec.pattern, out);
      break;
    case MetricMode::inverse_stdout: {
      const auto raw = spec.pattern.empty() ? last_number(out) : last_capture(spec.pattern, out);
      if (raw && *raw != 0.0) value = 1.0 / *raw;
      break;
    }
  }
  if (value && !std::isfinite(*value)) return std::nullopt;
  return value;
}

}  // namespace looptune
