#pragma once

#include <stdexcept>
#include <string>

namespace fbmtest {

// Parameter outside its mathematical domain (H not in (0,1), alpha <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Zero or otherwise unusable dimension.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Autocovariance lag outside [0, n-1].
class LagOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Input series length differs from the configured length.
class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Circulant embedding produced negative eigenvalues beyond tolerance.
class EmbeddingFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Quadrature or root search did not reach its tolerance.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline void check_lag(std::size_t n, std::size_t k) {
  if (n == 0) throw DimensionError("series length must be positive");
  if (k >= n) {
    throw LagOutOfRange("lag " + std::to_string(k) + " out of range for length " +
                        std::to_string(n));
  }
}

}  // namespace fbmtest
