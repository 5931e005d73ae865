#pragma once

#include <string>
#include <vector>

namespace agrivqa {

/// Dispatches one CLI invocation (argv without the program name).
/// Exit codes: 0 success, 2 config error, 3 dataset error, 4 endpoint
/// failure, 5 internal.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace agrivqa
