#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace xpg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitIntegrity = 3;

// Subcommands gen-scenes, train, eval and replay. args excludes the program
// name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xpg::cli
