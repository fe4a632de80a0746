#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wclust {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed network or energy configuration text.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Tensor shapes that cannot be produced or combined.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Layer configuration the analytical model has no formula for.
class UnsupportedLayerError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to a numerical routine (bit widths, ratios, indices).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Corrupt or truncated binary input. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace wclust
