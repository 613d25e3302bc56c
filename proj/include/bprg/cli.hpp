#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bprg {

// Exit codes: 0 success, 1 usage error, 2 data/format/config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Subcommands: train, prune, regrow, run, report. `args` excludes the
// program name. Progress goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bprg
