#pragma once

#include <string>
#include <vector>

namespace noisecast {

// Entry point shared by the noisecast binary and the test suite.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
int run_cli(const std::vector<std::string>& args);

}  // namespace noisecast
