#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridse {

/// Malformed or inconsistent input (files, ids, partitions). CLI exit code 1.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Branch with zero series reactance.
class DegenerateBranchError : public InputError {
  public:
    using InputError::InputError;
};

/// Numerical failure during estimation or factorization. CLI exit code 2.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-positive pivot in a Cholesky factorization. `columns` holds the
/// offending columns in the caller's index space (matrix columns for the
/// solver, bus ids once re-thrown by the estimator).
class UnobservableError : public NumericalError {
  public:
    UnobservableError(const std::string& what, std::vector<int> columns)
        : NumericalError(what), columns_(std::move(columns)) {}

    const std::vector<int>& columns() const noexcept { return columns_; }

  private:
    std::vector<int> columns_;
};

class DivergenceError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

}  // namespace gridse
