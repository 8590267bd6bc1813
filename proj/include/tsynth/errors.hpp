#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsynth {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed formulas, inconsistent files, unsupported modes.
// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Numerical failure such as a solver that does not converge (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public InputError {
 public:
  SyntaxError(std::size_t position, std::string expected, std::string found)
      : InputError("syntax error at position " + std::to_string(position) + ": expected " +
                   expected + ", found " + found),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class UnknownProposition : public InputError {
 public:
  explicit UnknownProposition(const std::string& name)
      : InputError("unknown atomic proposition '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class NotCoSafe : public InputError {
 public:
  using InputError::InputError;
};

class StateBudgetExceeded : public InputError {
 public:
  explicit StateBudgetExceeded(std::size_t limit)
      : InputError("DFA construction exceeded the state budget of " + std::to_string(limit)),
        limit_(limit) {}
  std::size_t limit() const { return limit_; }

 private:
  std::size_t limit_;
};

class AlphabetMismatch : public InputError {
 public:
  using InputError::InputError;
};

class Unlevelable : public InputError {
 public:
  using InputError::InputError;
};

class GenerativeUnsupported : public InputError {
 public:
  using InputError::InputError;
};

class NoSubgoal : public InputError {
 public:
  explicit NoSubgoal(std::size_t q)
      : InputError("no subgoal defined for automaton state q" + std::to_string(q)) {}
};

class CheckpointMismatch : public InputError {
 public:
  using InputError::InputError;
};

class SteppedAfterDone : public Error {
 public:
  SteppedAfterDone() : Error("step called on a finished episode") {}
};

class UnknownAutomatonState : public Error {
 public:
  explicit UnknownAutomatonState(std::size_t q)
      : Error("automaton state q" + std::to_string(q) + " has no approximator"), q_(q) {}
  std::size_t q() const { return q_; }

 private:
  std::size_t q_;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  EmptyBatch() : Error("empty trajectory batch") {}
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(std::size_t iterations, double last_delta)
      : NumericalError("value iteration did not converge after " + std::to_string(iterations) +
                       " iterations (last delta " + std::to_string(last_delta) + ")"),
        iterations_(iterations),
        last_delta_(last_delta) {}
  std::size_t iterations() const { return iterations_; }
  double last_delta() const { return last_delta_; }

 private:
  std::size_t iterations_;
  double last_delta_;
};

// Wraps a failure raised while solving one level of a partition.
class LevelError : public Error {
 public:
  LevelError(std::size_t level, const std::string& what, bool numerical)
      : Error("level " + std::to_string(level) + ": " + what), level_(level), numerical_(numerical) {}
  std::size_t level() const { return level_; }
  // True when the underlying failure was a NumericalError.
  bool numerical() const { return numerical_; }

 private:
  std::size_t level_;
  bool numerical_;
};

}  // namespace tsynth
