#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rilab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or audit failure
inline constexpr int kExitUsage = 2;

/// Runs one command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rilab::cli
