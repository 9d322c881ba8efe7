// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace beacon::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,       // unknown flag, bad value, out-of-range option
  kIo = 3,          // missing or unwritable file
  kBadFormat = 4,   // malformed tensor / BCNQ file
  kBadShape = 5,    // inconsistent dimensions between inputs
};

// Runs `beacon <subcommand> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace beacon::cli
