#pragma once

#include <string>
#include <vector>

namespace sfem::cli {

// Runs one subcommand; args exclude the program name. Returns the process
// exit code: 0 success, 1 invariant violation or numerical abort,
// 2 configuration or IO error.
int run_cli(const std::vector<std::string>& args);

}  // namespace sfem::cli
