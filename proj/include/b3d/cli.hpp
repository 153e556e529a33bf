#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "b3d/error.hpp"

namespace b3d {

enum ExitCode : int {
  kExitOk = 0,
  kExitBadArguments = 2,
  kExitIo = 3,
  kExitBackend = 4,
  kExitPrecondition = 5,
};

int exit_code_for(ErrorKind kind);

// Runs one command line (args excludes the program name) and returns the
// process exit code. Human output goes to `out` and `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace b3d
