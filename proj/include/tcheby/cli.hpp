#pragma once

#include <string>
#include <vector>

namespace tcheby {

// Runs one CLI invocation. argv excludes the program name. Returns 0 on
// success, 1 for invalid flags/config, 2 for runtime failures.
int cli_run(const std::vector<std::string>& argv);

}  // namespace tcheby
