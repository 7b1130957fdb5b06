#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace citune::cli {

/// Dispatches `argv[1]` to simulate | gramian-bounds | tune | evaluate | report.
/// Exit codes: 0 success, 1 domain error, 2 configuration or usage error.
/// Errors are written to `err` as a single JSON object {"error", "message"}.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace citune::cli
