#pragma once

#include <string>
#include <vector>

namespace numgen {

// Runs the numgen command line. `args` excludes the program name.
// Returns 0 on success, 2 on a usage or config error, 1 on a runtime failure.
int run_cli(const std::vector<std::string>& args);

} // namespace numgen
