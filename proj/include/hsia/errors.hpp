#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsia {

// Root of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument value (even window, label out of range, lo > hi, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Inconsistent shapes or model/data contracts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. a backward pass without a forward cache.
class UsageError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Confusion matrix whose chance agreement is 1 while observed agreement is not.
class DegenerateMarginalsError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsia
