#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pairstop::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kNumericalError = 3,
};

/// Runs the command line `args` (args[0] is the program name). Results go to
/// `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Rounds to 9 significant digits (the precision of every emitted float).
double round9(double x);

}  // namespace pairstop::cli
