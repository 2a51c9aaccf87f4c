#pragma once

#include <stdexcept>
#include <string>

namespace mygo {

// Error classes map onto distinct CLI exit codes (see tools/mygo.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Missing, malformed or inconsistent input files.
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite values, shape mismatches, failed numeric preconditions.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace mygo
