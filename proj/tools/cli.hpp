#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace repmetric::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 success, 1 usage, 2 validation or I/O, 3 numerical.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace repmetric::cli
