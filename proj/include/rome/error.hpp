#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rome {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument: empty dataset, dimension mismatch, non-finite value.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// A configuration that violates a documented rule.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Operation requested on an object that is not ready for it.
class InvalidState : public Error {
public:
    using Error::Error;
};

// Environment used out of sequence (e.g. two rewards for one step).
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace rome
