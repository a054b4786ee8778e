#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cforest {

/// Exit codes shared by every subcommand.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int violated = 2;
inline constexpr int mismatch = 3;
inline constexpr int usage = 64;
}  // namespace exit_code

/// Entry point of the command-line tool. `args` excludes the program name.
/// Subcommands: train, explain, audit, sweep, generate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cforest
