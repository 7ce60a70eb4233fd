#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace driftnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter, configuration value or input violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The requested scheme or diagnostic is not available for this model.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// A simulated state or a training loss became non-finite (or left the guard box).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t index)
        : Error(what), index_(index) {}

    /// Step index (simulation) or epoch index (training) at which divergence was detected.
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Malformed configuration or network file.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace driftnet
