#pragma once

#include <stdexcept>
#include <string>

namespace robustbf {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can catch one type and map it to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch or violated precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Cholesky pivot fell below threshold: the matrix is not positive definite.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

// A channel (or its regularized solve) vanished so no direction can be formed.
class DegenerateChannelError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Iterative solver could not establish a bracket or rank condition.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace robustbf
