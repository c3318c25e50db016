#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace csghmm {

/// Base class for all csghmm exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transition matrix is not column-stochastic within tolerance.
class NonStochasticError : public Error {
 public:
  using Error::Error;
};

/// The latent chain is reducible; no unique stationary distribution exists.
class ReducibleChainError : public Error {
 public:
  using Error::Error;
};

/// A propagated message vector vanished: the observations are impossible
/// under every state.
class DegenerateLikelihoodError : public Error {
 public:
  using Error::Error;
};

/// A column of the raw transition iterate is entirely zero; the simplex
/// projection is undefined (usually the sampler has diverged).
class ZeroColumnError : public Error {
 public:
  using Error::Error;
};

/// Subchain length is even, nonpositive, or exceeds the series length.
class InvalidLengthError : public Error {
 public:
  using Error::Error;
};

/// No gap-separated subsample of the requested size could be drawn.
class InfeasibleGapError : public Error {
 public:
  using Error::Error;
};

class EmptyClusterError : public Error {
 public:
  using Error::Error;
};

class QuotaExceedsClusterError : public Error {
 public:
  using Error::Error;
};

class TooManyClustersError : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradientError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

class UnknownDatasetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EmptySeriesError : public Error {
 public:
  using Error::Error;
};

/// A data row failed to parse; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::int64_t line)
      : Error(message + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::int64_t line() const { return line_; }

 private:
  std::int64_t line_;
};

}  // namespace csghmm
