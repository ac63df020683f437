#ifndef KRAMERS_ERRORS_HPP_
#define KRAMERS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace kramers {

// Bad argument values (non-positive step, empty grid, unequal counts, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A drift or diffusion evaluation returned a non-finite value.
class ModelEvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Explicit Euler step requested with dt > mass_cfl * m.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called outside its admissible range (mass too large,
// velocities missing, non-constant diffusion for the null case, ...).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A simulated state became non-finite.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double time, std::size_t step)
      : std::runtime_error(what), time_(time), step_(step) {}
  double time() const { return time_; }
  std::size_t step() const { return step_; }

 private:
  double time_;
  std::size_t step_;
};

// Numerical domain problems in quadrature (density underflow, divergent
// normalization).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration parse failures carry a line (0 when unknown) and field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line, std::string field)
      : std::runtime_error(what), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

}  // namespace kramers

#endif  // KRAMERS_ERRORS_HPP_
