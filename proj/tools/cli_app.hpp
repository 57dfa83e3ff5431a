#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "steindisc/common.hpp"
#include "steindisc/harness.hpp"

namespace steindisc::cli {

enum ExitCode : int {
  kSuccess = 0,
  kNotEligible = 1,
  kUsageError = 2,
  kNumericalFailure = 3,
};

/// "lambda=2" or "p=0.2,0.3,r=1.5": a token without '=' appends to the previous name.
harness::NamedValues parse_named_values(std::string_view text);

/// One observation per line, whitespace-separated coordinates, '#' starts a comment.
IntMatrix parse_data(std::string_view text);
IntMatrix read_data(const std::string& path);

/// Runs the command line and returns the exit code. Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace steindisc::cli
