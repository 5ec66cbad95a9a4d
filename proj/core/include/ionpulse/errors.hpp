#pragma once

#include <stdexcept>
#include <string>

namespace ionpulse {

// Every module error derives from Error so the CLI can map families to exit
// codes without knowing each concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// quantum_core
class InvalidDecay : public Error {
 public:
  using Error::Error;
};

// estimation
class NotConverged : public Error {
 public:
  using Error::Error;
};

class DegeneratePhase : public Error {
 public:
  using Error::Error;
};

// scheduler
class InfeasibleWindow : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class RateExceeded : public Error {
 public:
  using Error::Error;
};

class UnknownRate : public Error {
 public:
  using Error::Error;
};

class NonPhysical : public Error {
 public:
  using Error::Error;
};

// cli_io
class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnitError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

class RangeError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

}  // namespace ionpulse
