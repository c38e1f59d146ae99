#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace disagree {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitPipeline = 2;

/// Entry point of the `disagree` tool. `args` excludes the program name.
/// Returns 0 on success, 1 for parse/validation errors (including bad
/// flags), 2 for pipeline errors and refusals.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace disagree
