#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scale {

// Exit codes of the scale_opt command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // divergence, failed verification
inline constexpr int kExitUsage = 2;    // bad flags, unreadable or invalid config

// Subcommands: train, bench-norms, memory, variance, verify.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Parallel seed runs: SCALE_OPT_THREADS if set and positive, otherwise the
// hardware concurrency, never more than `jobs`.
unsigned worker_count(std::size_t jobs);

}  // namespace scale
