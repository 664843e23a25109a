#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopman {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition (dimension mismatch, empty set, bad parameter).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A state became non-finite or exceeded the divergence guard during integration.
class IntegrationDiverged : public Error {
public:
    explicit IntegrationDiverged(std::size_t step)
        : Error("integration diverged at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Every singular value of the lifted data matrix fell below the truncation threshold.
class DegenerateDictionary : public Error {
public:
    using Error::Error;
};

/// The eigenvector matrix of K is numerically singular.
class IllConditionedEigendecomposition : public Error {
public:
    using Error::Error;
};

/// An integrated endpoint is not close enough to any attractor target.
class UnresolvedBasin : public Error {
public:
    using Error::Error;
};

} // namespace koopman
