#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fracspde {

//! Base class of every error raised by the library. `kind()` is a stable
//! machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error
{
public:
  Error(std::string kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(std::move(kind))
  {}

  const std::string& kind() const noexcept { return kind_; }

  //! Validation errors map to exit status 2, numerical consistency
  //! failures to 3.
  virtual bool is_validation() const noexcept { return false; }

private:
  std::string kind_;
};

//! A type invariant was violated at construction or call time.
class ConstraintViolation : public Error
{
public:
  explicit ConstraintViolation(const std::string& what)
    : Error("constraint_violation", what)
  {}
  bool is_validation() const noexcept override { return true; }
};

//! Argument outside the mathematical domain of an operation (t < 0, ...).
class DomainError : public Error
{
public:
  explicit DomainError(const std::string& what)
    : Error("domain_error", what)
  {}
  bool is_validation() const noexcept override { return true; }
};

class ConfigurationError : public Error
{
public:
  explicit ConfigurationError(const std::string& what)
    : Error("configuration_error", what)
  {}
  bool is_validation() const noexcept override { return true; }
};

//! Kernel evaluation hit resolution limits (negative ripple beyond tolerance).
class TruncationError : public Error
{
public:
  explicit TruncationError(const std::string& what)
    : Error("truncation_error", what)
  {}
};

//! A spectral integral that must be finite was detected to diverge.
class DivergenceError : public Error
{
public:
  explicit DivergenceError(const std::string& what)
    : Error("divergence_error", what)
  {}
};

//! The available frequency range does not support a verdict.
class InconclusiveError : public Error
{
public:
  explicit InconclusiveError(const std::string& what)
    : Error("inconclusive_error", what)
  {}
};

//! A mathematical inequality that must hold did not, beyond tolerance.
class ConsistencyError : public Error
{
public:
  explicit ConsistencyError(const std::string& what)
    : Error("consistency_error", what)
  {}
};

class SynthesisError : public Error
{
public:
  explicit SynthesisError(const std::string& what)
    : Error("synthesis_error", what)
  {}
};

class BlowUpError : public Error
{
public:
  BlowUpError(const std::string& what, std::size_t step, std::size_t replicate)
    : Error("blow_up", what)
    , step_(step)
    , replicate_(replicate)
  {}
  std::size_t step() const noexcept { return step_; }
  std::size_t replicate() const noexcept { return replicate_; }

private:
  std::size_t step_;
  std::size_t replicate_;
};

class ConvergenceFailure : public Error
{
public:
  ConvergenceFailure(const std::string& what, std::vector<double> residuals)
    : Error("convergence_failure", what)
    , residuals_(std::move(residuals))
  {}
  //! Sup-norm residual of each Picard iteration.
  const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
  std::vector<double> residuals_;
};

class InsufficientResolution : public Error
{
public:
  explicit InsufficientResolution(const std::string& what)
    : Error("insufficient_resolution", what)
  {}
};

class EllipticityViolation : public Error
{
public:
  explicit EllipticityViolation(const std::string& what)
    : Error("ellipticity_violation", what)
  {}
  bool is_validation() const noexcept override { return true; }
};

} // namespace fracspde
