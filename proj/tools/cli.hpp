#pragma once

#include <string>
#include <vector>

namespace crm::cli {

/// Entry point shared by main() and the tests. Returns the process exit code:
/// 0 success, 1 verification failure (gradient check, divergence), 2 usage or
/// config errors.
int run(const std::vector<std::string>& args);

}  // namespace crm::cli
