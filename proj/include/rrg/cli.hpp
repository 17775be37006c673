#pragma once

#include <string>
#include <vector>

namespace rrg {

// Entry point for the rrgen tool. argv excludes the program name. Returns the
// process exit code: 0 success, 1 runtime failure, 2 usage error.
int run_command(const std::vector<std::string>& argv);

}  // namespace rrg
