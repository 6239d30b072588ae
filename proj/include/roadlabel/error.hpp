#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace roadlabel {

enum class ErrorKind {
    InvalidTransform,
    DimensionMismatch,
    ZeroEnergy,
    DegenerateScene,
    UnknownFrame,
    Io,
    Config,
    Validation,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace roadlabel
