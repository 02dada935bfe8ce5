#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memfly {

enum class ErrorCode {
    DimensionMismatch,
    UnknownKeyword,
    EmptySurface,
    NotFound,
    SelfLoop,
    Io,
    SchemaVersionMismatch,
    CorruptSnapshot,
    EmptyText,
    ZeroVector,
    RemoteFailure,
    EmptyGraph,
    DatasetFormat,
    InvalidConfig,
    Precondition,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure the engine reports carries one of the codes above so callers
// (CLI exit codes, HTTP status mapping, Python exceptions) can branch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace memfly
