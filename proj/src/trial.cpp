#include "looptune/trial.hpp"

#include <stdexcept>

namespace looptune {

std::string_view to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::ok: return "ok";
    case TrialStatus::compile_fail: return "compile_fail";
    case TrialStatus::run_fail: return "run_fail";
    case TrialStatus::timeout: return "timeout";
  }
  return "?";
}

TrialStatus parse_trial_status(std::string_view text) {
  if (text == "ok") return TrialStatus::ok;
  if (text == "compile_fail") return TrialStatus::compile_fail;
  if (text == "run_fail") return TrialStatus::run_fail;
  if (text == "timeout") return TrialStatus::timeout;
  throw std::invalid_argument("unknown trial status '" + std::string(text) + "'");
}

double penalty_metric(std::optional<double> worst_ok, double fallback) {
  return worst_ok ? 10.0 * *worst_ok : fallback;
}

}  // namespace looptune
