#pragma once

#include <string>
#include <vector>

namespace capd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNumerical = 4;

// Subcommands: synth, train, predict, eval. Errors are reported on stderr as
// a single `capd: error kind=<usage|validation|numerical> message="..."` line.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace capd::cli
