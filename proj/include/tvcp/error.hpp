#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tvcp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown label tokens and other vocabulary violations.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was not met by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Data violates a domain invariant; carries the offending ids.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> ids)
      : Error(what + format_ids(ids)), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  static std::string format_ids(const std::vector<std::string>& ids) {
    if (ids.empty()) return {};
    std::string out = " [";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out += ", ";
      if (i == 20) {
        out += "... " + std::to_string(ids.size() - 20) + " more";
        break;
      }
      out += ids[i];
    }
    return out + "]";
  }
  std::vector<std::string> ids_;
};

class EncoderError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, int batch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Operation is not allowed in the current state (closed HIT, reviewed submission, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

// Duplicate or concurrent write detected.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace tvcp
