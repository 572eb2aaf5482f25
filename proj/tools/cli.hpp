#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace loopclose::cli {

/// Runs one `loopclose` invocation; `args` excludes the program name.
/// Exit codes: 0 success, 1 detect found no loop, 2 usage or input error,
/// 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace loopclose::cli
