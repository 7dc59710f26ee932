#pragma once

#include <string>
#include <vector>

namespace hhws {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
/// 3 some fits failed without --keep-going.
int run_cli(const std::vector<std::string>& args);

}  // namespace hhws
