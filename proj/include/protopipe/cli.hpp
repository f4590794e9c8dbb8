#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace protopipe {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;  // bad flags, config, weights, dimension mismatch
inline constexpr int kExitDataError = 3;    // dataset, frames, unknown user or video

// Runs the tool with `args` (without the program name). Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace protopipe
