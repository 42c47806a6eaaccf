#pragma once

#include <stdexcept>
#include <string>

namespace smoothsnn {

// Root of every error the library throws. Subclasses name the failure class
// so callers (and the CLI) can map them to diagnostics without parsing text.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A scalar argument outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input data that is non-finite, out of range, or otherwise unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

// Two objects that must agree (trace vs params, config vs checkpoint) do not.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized bytes. Carries the byte offset where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration; `key()` names the offending entry when known.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace smoothsnn
