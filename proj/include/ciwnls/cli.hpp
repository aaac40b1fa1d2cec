#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ciwnls {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

/// Runs one verb. `args` excludes the program name. Data goes to `out`,
/// diagnostics, usage text on errors and progress to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace ciwnls
