#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hpsec {

// Exit codes: 0 success, 1 negative verdict, 2 usage or input error.
constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;
constexpr int kExitUsage = 2;

// Runs `hpsec <args...>` (args excludes the program name). Reports go to out,
// diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hpsec
