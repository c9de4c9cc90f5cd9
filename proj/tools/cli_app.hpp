#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace tarstop::cli {

inline constexpr std::uint64_t kDefaultSeed = 20240229;

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitNumeric = 4;

/// Runs one invocation. args excludes the program name. Results go to the
/// files named by --output / --per-topic (or to out when --output is absent);
/// diagnostics go to err. Output files are written only after every result
/// has been computed.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tarstop::cli
