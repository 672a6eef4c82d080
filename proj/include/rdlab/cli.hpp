#pragma once

#include <string>
#include <vector>

namespace rdlab {

// Runs one experiment subcommand. Exit codes: 0 success, 2 configuration
// error, 3 numerical blow-up or I/O failure, 4 check-mode failure.
int cli_run(const std::vector<std::string>& args);

}  // namespace rdlab
