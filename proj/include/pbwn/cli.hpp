#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pbwn::cli {

/// Runs one CLI invocation. args holds the arguments after the program
/// name. Returns the process exit code: 0 on success, 1 on runtime failure
/// (missing data, degenerate rows, bad input files), 2 on usage errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace pbwn::cli
