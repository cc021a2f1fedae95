#pragma once

#include <iosfwd>

namespace permsig {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
};

/// Entry point shared by the `permsig` executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace permsig
