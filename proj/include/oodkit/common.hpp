#pragma once

#include <stdexcept>
#include <string>

namespace oodkit {

inline constexpr const char* kVersion = "0.1.0";

// Base class for everything this library throws.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Matrix / layer dimension disagreement. Message names the offending layer.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its mathematical domain (T <= 0, p outside [0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Label or column index out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed input file (IDX magic, truncation, CSV cells). Names the offset
// or row/column where parsing stopped.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid synthetic-dataset or split specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Training diverged or could not satisfy its contract; message names the epoch.
class TrainError : public Error {
 public:
  using Error::Error;
};

// Metric computed over an empty or non-finite score population.
class MetricError : public Error {
 public:
  using Error::Error;
};

// Detector applied to a model that cannot support it.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced where the contract requires finite output.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace oodkit
