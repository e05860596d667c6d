#pragma once

#include <stdexcept>
#include <string>

namespace decsum {

/// Bad flags, bad configuration values, unreadable inputs. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation was asked for on inputs outside its domain (empty samples, missing predictions).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a precondition (duplicate or out-of-range sentence indices).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// External scorer could not be reached, died, or timed out. Maps to exit code 3.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// External scorer answered, but the answer does not follow the wire protocol.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::string offending_line)
      : std::runtime_error(what + ": " + offending_line), line_(std::move(offending_line)) {}

  const std::string& offending_line() const noexcept { return line_; }

 private:
  std::string line_;
};

}  // namespace decsum
