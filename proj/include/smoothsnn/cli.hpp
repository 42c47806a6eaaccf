#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace smoothsnn {

/// Entry point of the `smoothsnn` command: `train`, `eval` and `analyze`.
/// Returns the process exit code; failures print one diagnostic line to
/// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smoothsnn
