#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace snekhorn {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid input or parameter (maps to CLI exit code 2).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// An iterative solver stopped before meeting its tolerance (exit code 3).
// Carries the residual trace recorded up to the failure.
class NotConverged : public Error {
public:
    NotConverged(const std::string& what, std::vector<double> trace)
        : Error(what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

// File could not be read or written (exit code 4).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace snekhorn
