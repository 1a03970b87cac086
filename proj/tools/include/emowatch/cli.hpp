#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emowatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Parses argv (program name first) and runs the subcommand. Data goes to
// `out` or to --out files, progress and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace emowatch::cli
