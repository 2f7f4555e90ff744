#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace looptune {

struct CommandResult {
  int exit_code = -1;    // valid when !signaled && !timed_out
  int signal = 0;        // terminating signal, 0 if none
  bool timed_out = false;
  std::string out;
  std::string err;
  double elapsed = 0.0;  // seconds

  bool success() const { return !timed_out && signal == 0 && exit_code == 0; }
};

// Runs `command` through /bin/sh in its own process group with the parent
// environment plus `env`. On timeout the whole group is killed with SIGKILL.
// Never returns later than timeout + kKillGrace seconds.
CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                          const std::map<std::string, std::string>& env, double timeout_seconds);

inline constexpr double kKillGrace = 5.0;

// Single-quotes `text` for /bin/sh.
std::string shell_quote(const std::string& text);

}  // namespace looptune
