#pragma once

#include <iosfwd>

namespace recf::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,  // bad flags, bad config
  kData = 2,   // unreadable or malformed input data
};

/// Runs the recf command line. argv[0] is the program name. Results go to
/// out; warnings, progress and errors go to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace recf::cli
