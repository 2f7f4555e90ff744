#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "looptune/space.hpp"

namespace looptune {

enum class TrialStatus { ok, compile_fail, run_fail, timeout };

std::string_view to_string(TrialStatus status);
TrialStatus parse_trial_status(std::string_view text);

// One evaluated configuration. Non-ok trials carry a finite penalty metric so
// surrogates can learn from them.
struct TrialRecord {
  Configuration configuration;
  double metric = 0.0;   // lower is better
  double elapsed = 0.0;  // wall seconds for the whole evaluation
  TrialStatus status = TrialStatus::ok;
  std::string stdout_digest;
  std::string stderr_digest;
  std::string message;

  bool ok() const { return status == TrialStatus::ok; }
};

// 10x the worst ok metric so far, or `fallback` (the timeout in seconds) when
// nothing has succeeded yet.
double penalty_metric(std::optional<double> worst_ok, double fallback);

}  // namespace looptune
