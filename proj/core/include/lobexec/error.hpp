#pragma once

#include <stdexcept>
#include <string>

namespace lobexec {

/// Base class for every error raised by the library. The `code()` is a short
/// stable token used by the command-line tool for machine-parseable output.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, const std::string& reason)
        : Error("parse", "row " + std::to_string(row) + ": " + reason), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class SimError : public Error {
public:
    explicit SimError(const std::string& message) : Error("sim", message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

}  // namespace lobexec
