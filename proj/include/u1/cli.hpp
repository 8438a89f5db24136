#pragma once

#include <ostream>
#include <span>
#include <string>

namespace u1::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

/// Runs one subcommand. `args` excludes the program name. Primary results go
/// to `out` as JSON; diagnostics and usage text go to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace u1::cli
