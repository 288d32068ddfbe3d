#pragma once

#include <stdexcept>
#include <string>

namespace factr {

enum class ErrorKind {
  invalid_argument,
  io,
  config,
  numeric,
  fault,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace factr
