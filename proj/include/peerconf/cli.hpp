#pragma once

// Command-line front end: simulate, solve, estimate, spec-test, montecarlo
// and diagnose. Options may also come from a config file (--config, INI or
// TOML with one [section] per command); flags on the command line win.
//
// Exit codes: 0 success, 1 other failure, 2 parse or validation error,
// 3 convergence failure, 4 identification failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace peerconf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitConvergence = 3;
inline constexpr int kExitIdentification = 4;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace peerconf
