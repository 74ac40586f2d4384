#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace promobn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInputError = 2;

// Runs the command line `args` (args[0] is the program name). Normal output
// goes to `out`, diagnostics to `err`. Returns the process exit code.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace promobn::cli
