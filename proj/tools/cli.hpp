#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace binar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAlarm = 3;

/// Entry point of the `binar` tool; args[0] is the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace binar::cli
