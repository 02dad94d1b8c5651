#ifndef LCA_ERRORS_HPP
#define LCA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lca {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (CLI exit code 4).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input file (bad magic, dimensions, truncation).
struct FormatError : Error {
  using Error::Error;
};

// Checksum mismatch or non-finalized artifact.
struct IntegrityError : Error {
  using Error::Error;
};

// NaN/Inf encountered during computation (CLI exit code 3).
struct NumericError : Error {
  using Error::Error;
};

// Cumulative allocation error exceeded the 1% gate (CLI exit code 2).
struct GateError : Error {
  using Error::Error;
};

}  // namespace lca

#endif
