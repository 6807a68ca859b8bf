#pragma once

#include <stdexcept>
#include <string>

namespace lcdr {

// Exit codes used by the CLI: 0 success, 2 input error, 3 numerical
// abort, 4 output conflict.
enum ExitCode : int {
  exit_ok = 0,
  exit_input_error = 2,
  exit_numerical_abort = 3,
  exit_output_conflict = 4,
};

// Bad shapes, bad option values, missing artifacts.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files; carries a human-readable location in the message.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses, failed calibration, degenerate numerics.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Refusal to clobber an existing output without --force.
struct OutputConflict : std::runtime_error {
  explicit OutputConflict(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lcdr
