#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dime {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: CLI flags, run configuration, malformed program or log
// files. The CLI maps these to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Syntax or semantic error in a program document.
class ProgramError : public ConfigError {
 public:
  ProgramError(std::size_t line, const std::string& what)
      : ConfigError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Malformed or mismatching redundancy-log file.
class LogFormatError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Failure of the guest program while executing (step limit, falling off
// an image, return with an empty call stack). Exit code 2.
class GuestError : public Error {
 public:
  using Error::Error;
};

// Address that does not belong to any loaded image.
class AddressError : public Error {
 public:
  using Error::Error;
};

// Internal protocol violation between executor and budget server.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dime
