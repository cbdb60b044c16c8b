#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pcdan::cli {

/// Runs one invocation; args exclude the program name. Returns the process
/// exit code: 0 success, 1 runtime failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pcdan::cli
