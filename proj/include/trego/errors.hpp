#pragma once

#include <stdexcept>
#include <string>

namespace trego {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidHyperparameterError : public Error {
public:
    using Error::Error;
};

/// An operation was requested on an object in the wrong state (e.g. an unfitted model).
class StateError : public Error {
public:
    using Error::Error;
};

/// Covariance factorization failed even after jitter escalation.
class NumericalError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Objective evaluated outside its feasible box.
class DomainError : public Error {
public:
    using Error::Error;
};

class AggregationError : public Error {
public:
    using Error::Error;
};

}  // namespace trego
