#ifndef DPAM_ERRORS_HPP
#define DPAM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpam {

/// Caller broke a documented precondition (dimension mismatch, bad range).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateCovariate : public Error {
 public:
  using Error::Error;
};

/// Scalar root solver failed to bracket or converge.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// An invariant the algorithm guarantees was observed to fail.
class InternalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), message_(what), step_(step) {}
  long step() const { return step_; }
  // what() without the step suffix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  long step_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpam

#endif  // DPAM_ERRORS_HPP
