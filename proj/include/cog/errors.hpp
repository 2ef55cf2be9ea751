#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cog {

// Shape or dimension violation in a tensor op or model wiring.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Non-finite value produced by a forward op, gradient, or loss.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or mismatch between artifacts (e.g. checkpoint vs data).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O and format errors. `kind` lets callers distinguish corruption classes.
struct IoError : std::runtime_error {
    enum class Kind {
        OpenFailed,
        BadMagic,
        VersionMismatch,
        Truncated,
        BadHeader,
        BadValue,
        ParseError,
        WriteFailed,
    };

    IoError(Kind k, const std::string& msg, std::int64_t line_no = -1)
        : std::runtime_error(msg), kind(k), line(line_no) {}

    Kind kind;
    std::int64_t line;  // 1-based line number for text formats, -1 otherwise
};

}  // namespace cog
