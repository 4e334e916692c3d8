#pragma once

#include <stdexcept>
#include <string>

namespace iu4rec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or malformed shapes inside a numeric kernel.
class KernelError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad ids, malformed samples and records.
class DataError : public Error {
 public:
  using Error::Error;
};

// AUC on single-class input, RelaImpr against a random base, etc.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace iu4rec
