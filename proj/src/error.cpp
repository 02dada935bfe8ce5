#include "memfly/error.hpp"

namespace memfly {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownKeyword: return "UnknownKeyword";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::Io: return "Io";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::RemoteFailure: return "RemoteFailure";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::DatasetFormat: return "DatasetFormat";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Precondition: return "Precondition";
    }
    return "Unknown";
}

} // namespace memfly
