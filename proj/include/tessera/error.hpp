#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tessera {

enum class ErrorCode {
    NonManifoldEdge,
    InvalidMesh,
    MalformedHeader,
    RaggedScanline,
    NonFiniteCoordinate,
    InvalidScan,
    EmptyOutput,
    DegenerateTriangle,
    DegenerateTetrahedron,
    FrameMismatch,
    IncompleteLabeling,
    EmptyProblem,
    AllMerged,
    MissingRequiredProperty,
    UnknownKey,
    InvariantViolation,
    MissingUpstreamArtifact,
    EmptyScene,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NonManifoldEdge: return "NonManifoldEdge";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RaggedScanline: return "RaggedScanline";
    case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorCode::InvalidScan: return "InvalidScan";
    case ErrorCode::EmptyOutput: return "EmptyOutput";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::DegenerateTetrahedron: return "DegenerateTetrahedron";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::IncompleteLabeling: return "IncompleteLabeling";
    case ErrorCode::EmptyProblem: return "EmptyProblem";
    case ErrorCode::AllMerged: return "AllMerged";
    case ErrorCode::MissingRequiredProperty: return "MissingRequiredProperty";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace tessera
