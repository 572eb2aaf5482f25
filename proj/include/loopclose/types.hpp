#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace loopclose {

using Scalar = double;

template <typename S>
using Vector2 = Eigen::Matrix<S, 2, 1>;
template <typename S>
using Matrix3 = Eigen::Matrix<S, 3, 3>;

using Vector2d = Vector2<double>;
using Vector3d = Eigen::Vector3d;
using Matrix3d = Eigen::Matrix3d;

/// Rigid 3-D pose (camera-to-world).
using Pose3d = Eigen::Isometry3d;

enum class ErrorCode {
    InvalidPose,
    InvalidGeometry,
    TooFewPoses,
    MaskMismatch,
    PatchOutOfBounds,
    InvalidImage,
    IndexOrder,
    EmptyFrame,
    EmptySequence,
    InvalidConfig,
    BadIndex,
    BadInformation,
    Disconnected,
    Diverged,
    SpecError,
    LengthMismatch,
    TooShort,
    ParseError,
    EmptyFile,
    UnsupportedFormat,
    IoError,
};

inline const char* to_string(ErrorCode code);

/// Structured error carrying a code and, for parsers, the 1-based line (or
/// byte offset for binary formats) where the problem was found.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<std::size_t> location = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), location_(location) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> location() const noexcept { return location_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> location_;
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidPose: return "InvalidPose";
        case ErrorCode::InvalidGeometry: return "InvalidGeometry";
        case ErrorCode::TooFewPoses: return "TooFewPoses";
        case ErrorCode::MaskMismatch: return "MaskMismatch";
        case ErrorCode::PatchOutOfBounds: return "PatchOutOfBounds";
        case ErrorCode::InvalidImage: return "InvalidImage";
        case ErrorCode::IndexOrder: return "IndexOrder";
        case ErrorCode::EmptyFrame: return "EmptyFrame";
        case ErrorCode::EmptySequence: return "EmptySequence";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::BadIndex: return "BadIndex";
        case ErrorCode::BadInformation: return "BadInformation";
        case ErrorCode::Disconnected: return "Disconnected";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::SpecError: return "SpecError";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace loopclose
