#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ife::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the `ife` command line. `args` excludes the program name. Reports go
/// to the --output file (or `out` when no file is given); errors are written
/// to `err` as JSON.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ife::cli
