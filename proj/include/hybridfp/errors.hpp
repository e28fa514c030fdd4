#pragma once

#include <stdexcept>
#include <string>

namespace hybridfp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry failures: points off the model, antipodal pairs, bad arguments.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class EmbeddingViolation : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class AntipodalPoints : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class EpsilonOutOfRange : public Error {
 public:
  using Error::Error;
};

class InfeasibleConstraints : public Error {
 public:
  using Error::Error;
};

class ProjectionDidNotConverge : public Error {
 public:
  using Error::Error;
};

class MissingParam : public Error {
 public:
  using Error::Error;
};

class DomainSamplerEmpty : public Error {
 public:
  using Error::Error;
};

class SchemeUnknown : public Error {
 public:
  using Error::Error;
};

class MissingSeries : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// Raised by the experiment harness; the message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridfp
