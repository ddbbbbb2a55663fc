#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gdk {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent network or layer configuration (shapes, spatial trace).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// API misuse by the caller: wrong argument ranges, wrong input shapes.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed binary input (images, checkpoints).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Values that parse but fall outside their legal range.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Text-file parse failure; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace gdk
