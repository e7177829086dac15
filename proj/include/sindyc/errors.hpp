#pragma once

#include <stdexcept>
#include <string>

namespace sindyc {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time grid is not uniform within tolerance.
class GridError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise unusable numeric data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// File layout or serialized document does not match the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Too few samples for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (out of range, unknown tag, missing companion data).
class ParamError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Snapshot data carries no usable rank.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Integrated trajectory left the admissible region; carries the blow-up time.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace sindyc
