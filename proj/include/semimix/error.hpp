#pragma once

#include <stdexcept>
#include <string>

namespace semimix {

enum class ErrorKind {
  InvalidArgument,
  SingularDesign,
  InvalidLevel,
  UnsupportedColumnType,
  DegenerateComponent,
  LengthMismatch,
  NoRoot,
  Io,
  Schema,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace semimix
