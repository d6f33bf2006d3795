#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mdopt {

// Base of every error thrown by the library. `is_usage()` separates bad input
// (CLI exit 2) from numerical failures (CLI exit 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual bool is_usage() const noexcept { return false; }
};

class InputError : public Error {
public:
    using Error::Error;
    bool is_usage() const noexcept override { return true; }
};

class LookupError : public InputError {
public:
    using InputError::InputError;
};

class EmptyRegionError : public Error {
public:
    using Error::Error;
};

class InfeasibleRegionError : public Error {
public:
    using Error::Error;
};

// Non-finite objective or integrand value; keeps the offending point.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::vector<double> point)
        : Error(what), point_(std::move(point)) {}
    const std::vector<double>& point() const noexcept { return point_; }

private:
    std::vector<double> point_;
};

class StencilError : public Error {
public:
    using Error::Error;
};

class DegenerateIntegrandError : public Error {
public:
    using Error::Error;
};

class InvalidShiftError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NearCriticalError : public Error {
public:
    using Error::Error;
};

class BracketingError : public Error {
public:
    using Error::Error;
};

}  // namespace mdopt
