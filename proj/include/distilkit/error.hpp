#pragma once

#include <stdexcept>
#include <string>

namespace distilkit {

// Error taxonomy used across the library. Everything derives from Error so
// callers can catch broadly; the CLI maps any Error to a nonzero exit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents disagree (matmul inner dims, loss shapes, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A numeric argument is outside its mathematical domain (T <= 0, p not in (0,1)).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A configuration object violates one of its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A file does not conform to its documented format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// An API was used against its contract (non-scalar backward, missing grads).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A dataset record is malformed or references an out-of-range label.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Prediction sets that should line up do not (missing/mismatched example ids).
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Training diverged (NaN/Inf in a loss component).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace distilkit
