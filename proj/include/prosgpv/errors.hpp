#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace prosgpv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input or configuration is invalid (shape mismatch, bad parameter, bad file).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Numerical failure while evaluating or fitting a model.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class ParameterError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Response carries no information (one class only, no events).
class DegenerateResponse : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class MalformedInterval : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : InvalidInput(what + " (line " + std::to_string(line) + ", column " +
                     std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A linear predictor left the representable range (e.g. exp overflow).
class EvaluationOverflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Information matrix is singular; `columns` names the dependent predictors.
class RankDeficient : public NumericalError {
 public:
  RankDeficient(const std::string& what, std::vector<int> columns)
      : NumericalError(what), columns_(std::move(columns)) {}

  const std::vector<int>& columns() const noexcept { return columns_; }

 private:
  std::vector<int> columns_;
};

class CollinearityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Coordinate descent failed to converge at `lambda`.
class PathError : public NumericalError {
 public:
  PathError(const std::string& what, double lambda)
      : NumericalError(what), lambda_(lambda) {}

  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// Failure inside the two-stage selection; carries the candidate set.
class SelectionError : public NumericalError {
 public:
  SelectionError(const std::string& what, int stage, std::vector<int> candidate_set)
      : NumericalError("stage " + std::to_string(stage) + ": " + what),
        stage_(stage),
        candidate_set_(std::move(candidate_set)) {}

  int stage() const noexcept { return stage_; }
  const std::vector<int>& candidate_set() const noexcept { return candidate_set_; }

 private:
  int stage_;
  std::vector<int> candidate_set_;
};

}  // namespace prosgpv
