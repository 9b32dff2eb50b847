#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flucsr {

/// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File content does not follow its format. `where` is a byte offset for
/// binary formats and a 1-based line number for text formats.
class FormatError : public IoError {
 public:
  FormatError(const std::string& path, const std::string& what, std::uint64_t where, bool is_line)
      : IoError(path + (is_line ? ": line " : ": byte offset ") + std::to_string(where) + ": " + what),
        where_(where) {}
  std::uint64_t where() const { return where_; }

 private:
  std::uint64_t where_;
};

/// Non-finite values appeared during a solve.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flucsr
