#pragma once

#include <iosfwd>

namespace mbbn::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kIo = 2;
inline constexpr int kStage = 3;
inline constexpr int kDiverged = 4;
inline constexpr int kCheckFailed = 5;

/// Runs one command line (argv[0] is the program name). Never throws; errors
/// are reported on err and mapped to the exit codes above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mbbn::cli
