#pragma once

#include <stdexcept>
#include <string>

namespace pubgml {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required column is missing, duplicated or of the wrong kind.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A CSV cell or JSON document could not be interpreted.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Feature engineering was requested after identifiers were dropped.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// Model fitting diverged or otherwise could not finish.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Too many folds failed for an evaluation to be meaningful.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pubgml
