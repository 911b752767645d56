#pragma once

#include <string>
#include <vector>

namespace morseuq::cli {

inline constexpr const char* kToolName = "morseuq";
inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 1, kFailure = 2 };

// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args);

// Reads MORSEUQ_LOG (error, info, debug) and points the default logger at stderr.
void configure_logging();

}  // namespace morseuq::cli
