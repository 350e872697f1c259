#pragma once

#include <stdexcept>
#include <string>

namespace tdep {

// Error taxonomy mirrored by the CLI exit codes: usage 1, data 2, capacity 3,
// numeric 4. Library code throws; only the CLI translates to exit codes.

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input: bad weights, NaN coordinates, dimension
// mismatch, unreadable files.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A configured resource budget would be exceeded (product atom budget,
// dense matrix budget).
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// A solver or iteration failed to reach its certified tolerance.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tdep
