#pragma once

#include <stdexcept>
#include <string>

namespace onco {

// Failure categories; the CLI maps them to process exit codes.
enum class ErrorKind {
  usage = 1,
  config = 2,
  io = 3,
  remote = 4,
  validation = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& m) { return Error(ErrorKind::usage, m); }
inline Error config_error(const std::string& m) { return Error(ErrorKind::config, m); }
inline Error io_error(const std::string& m) { return Error(ErrorKind::io, m); }
inline Error remote_error(const std::string& m) { return Error(ErrorKind::remote, m); }
inline Error validation_error(const std::string& m) { return Error(ErrorKind::validation, m); }

}  // namespace onco
