#pragma once

#include <string>
#include <vector>

namespace saw {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerification = 3;
inline constexpr int kExitSolver = 4;

// Runs one subcommand. args excludes the program name; envp supplies SAWTOOTH_ overrides (may be null).
int run_cli(const std::vector<std::string>& args, char** envp = nullptr);

}  // namespace saw
