#pragma once

#include <iosfwd>

namespace hybrid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBelowThreshold = 1;
inline constexpr int kExitUsage = 2;

/// hybridctl entry point. Results go to `out` (or the --out file), messages
/// to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hybrid
