#pragma once

#include <ostream>

namespace looptune {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // bad flags, unreadable or malformed inputs
inline constexpr int kExitNoSuccess = 3;  // the run produced no ok trial

// Entry point of the looptune command. The last line written to `out` is
// always a single JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace looptune
