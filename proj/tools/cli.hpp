#pragma once
// The `fregan` command line: train, sample, decompose, spectrum, compare, verify.

#include <iosfwd>
#include <string>
#include <vector>

namespace fregan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInvariant = 2;

// args excludes the program name. Machine-readable results go to `out`,
// the resolved configuration and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Shortest decimal that round-trips, always with a decimal point ("0.0", "1.5").
std::string format_number(double v);

}  // namespace fregan::cli
