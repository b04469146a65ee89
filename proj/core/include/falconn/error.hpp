#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace falconn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed specification or expression text. `position` is a byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A formula needs samples past the end of the signal, or an interval binds
/// to no sample at all.
class HorizonError : public Error {
 public:
  using Error::Error;
};

class UnknownChannelError : public Error {
 public:
  explicit UnknownChannelError(const std::string& name)
      : Error("unknown channel '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// A numerical solve produced a non-finite or exploding state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, double time)
      : Error(message + " at t=" + std::to_string(time)), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class BoundViolationError : public Error {
 public:
  using Error::Error;
};

/// Missing or incompatible persisted artifact.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class DistillationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace falconn
