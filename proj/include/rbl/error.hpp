#pragma once

#include <stdexcept>
#include <string>

namespace rbl {

enum class ErrorKind {
  Structural,     // record invariants (dimensions, labels)
  MissingFile,
  Schema,         // manifest / annotation / report field errors
  Validation,     // value out of allowed range
  Precondition,   // operation called outside its domain
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library. `path` names the offending file or
// field when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string path = {})
      : std::runtime_error(message), kind_(kind), path_(std::move(path)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  ErrorKind kind_;
  std::string path_;
};

}  // namespace rbl
