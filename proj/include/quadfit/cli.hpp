#pragma once

#include <iosfwd>

namespace quadfit {

// Exit codes of the command-line interface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // gradcheck found a mismatch
inline constexpr int kExitValidation = 2;  // bad input, config or file
inline constexpr int kExitDivergence = 3;  // optimizer produced non-finite values
inline constexpr int kExitUsage = 64;

// Runs one subcommand (template, synth, fit, eval, quality, gradcheck,
// aggregate) and returns its exit code. Normal output goes to `out`,
// diagnostics and usage text to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace quadfit
