#pragma once

#include <stdexcept>
#include <string>

namespace rifling {

/// Base of every error raised by the toolkit. Callers that only need to
/// distinguish "bad input" from "solver trouble" can catch the two
/// intermediate classes below.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NotPositiveSemidefinite : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class UnsupportedModel : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class DivisionByZero : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Numerical failures: the inputs were admissible but the computation could
/// not deliver a result at the requested accuracy.
class SolverError : public Error {
public:
    using Error::Error;
};

class CapacityError : public SolverError {
public:
    using SolverError::SolverError;
};

class ConvergenceError : public SolverError {
public:
    using SolverError::SolverError;
};

class DegenerateSteadyState : public SolverError {
public:
    using SolverError::SolverError;
};

class DegenerateSolution : public SolverError {
public:
    using SolverError::SolverError;
};

class CalibrationError : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace rifling
