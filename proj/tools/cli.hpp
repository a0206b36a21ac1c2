#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace resgrad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line. args[0] is the program name. The last line on
/// `err` is always `RESULT: <status>`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace resgrad::cli
