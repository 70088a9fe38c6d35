#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rgc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unsupported or inconsistent configuration (group kind, kernel size, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Violated call contract (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Built-in table or cache failed its own consistency check.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Bad input data (non-finite values and similar).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. Carries the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(int epoch)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace rgc
