#pragma once

#include <stdexcept>
#include <string>

namespace qadapose {

/// Failure categories. The CLI maps each one onto a process exit code.
enum class ErrorKind {
  contract,       // precondition of a pure function violated
  degeneracy,     // geometric or numerical degeneracy
  behind_camera,  // cheirality violation
  out_of_field,   // light spot beyond the detector
  detection,      // matched filter found no usable peak
  identifiability,
  config,
  io,
};

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

inline void require(bool condition, ErrorKind kind, const char* what) {
  if (!condition) fail(kind, what);
}

}  // namespace qadapose
