#pragma once

#include <stdexcept>
#include <string>

namespace prectr {

enum class ErrorKind {
  Dimension,
  Index,
  Graph,
  Numeric,
  Precondition,
  Validation,
  Divergence,
  Lookup,
  Training,
  Parse,
  UndefinedMetric,
  Dependency,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the whole library; the kind drives the C API
// status code and the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace prectr
