#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roleplay {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input record. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string field, const std::string& what);

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

/// Invalid configuration or unsatisfiable precondition on inputs.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A template placeholder had no binding.
class RenderError : public Error {
public:
    explicit RenderError(std::string placeholder);

    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

class ScriptExhaustedError : public Error {
public:
    using Error::Error;
};

/// Non-retryable rejection from a chat endpoint (HTTP 4xx).
class RequestError : public Error {
public:
    RequestError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Network failure or retries exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

class CacheMissError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given inputs (empty corpus, degenerate distribution).
class MetricError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

}  // namespace roleplay
