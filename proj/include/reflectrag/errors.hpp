#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reflectrag {

/// Base class of every error the engine raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data. `line()` is 1-based, 0 when not tied to a line.
class InputError : public Error {
public:
    explicit InputError(const std::string& message, std::size_t line = 0)
        : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A required index or component was not provided.
class StateError : public Error {
public:
    using Error::Error;
};

/// A remote backend failed: transport failure, non-success status, or retries exhausted.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& message, int status = 0, int attempts = 0)
        : Error(message), status_(status), attempts_(attempts) {}

    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    int attempts_;
};

class EmptyCompletionError : public BackendError {
public:
    explicit EmptyCompletionError(const std::string& message) : BackendError(message) {}
};

} // namespace reflectrag
