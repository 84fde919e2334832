#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace aft
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
/// Column-per-point coordinate storage.
using Points = Eigen::Matrix3Xd;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;

enum class ErrorCode
{
    InvalidArgument,
    DegenerateCloud,
    EmptyView,
    IoError,
    ConvergenceFailure,
    NoPositiveEigenvalues,
    DimensionMismatch,
    LengthMismatch,
    ManifestError,
    MissingAsset,
    VersionMismatch,
    DuplicateEntry,
    NoViableProxy,
    BackendUnavailable,
    SchemaViolation,
    NoMappedCenters,
    NoCandidates,
    EmptyCandidates,
    NoHumanRegion,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error
{
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::EmptyView: return "EmptyView";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::NoPositiveEigenvalues: return "NoPositiveEigenvalues";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::MissingAsset: return "MissingAsset";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::NoViableProxy: return "NoViableProxy";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::NoMappedCenters: return "NoMappedCenters";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::NoHumanRegion: return "NoHumanRegion";
    }
    return "Unknown";
}

} // namespace aft
