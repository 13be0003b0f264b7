#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace srnflab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/* Error taxonomy. Every failure mode callers are expected to branch on gets
   its own type; all derive from Error so the CLI can map them to exit codes. */
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input/contract violations (CLI exit code 3).
struct SpecInvalid : Error { using Error::Error; };
struct InvalidParam : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };
struct OutOfDomain : Error { using Error::Error; };
struct NotARotation : Error { using Error::Error; };
struct InsufficientSamples : Error { using Error::Error; };
struct Overlap : Error { using Error::Error; };
struct ProfileInvalid : Error { using Error::Error; };
struct NotClosed : Error { using Error::Error; };
struct NotConvex : Error { using Error::Error; };
struct IncompatibleData : Error { using Error::Error; };

// Numerical-stage failures (CLI exit code 4).
struct DegenerateImmersion : Error { using Error::Error; };
struct MeshFailure : Error { using Error::Error; };
struct NonPositiveJacobian : Error { using Error::Error; };
struct RoutingFailed : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct DegenerateInterpolation : Error { using Error::Error; };
struct StepUnstable : Error { using Error::Error; };

constexpr double kPi = 3.14159265358979323846;

} // namespace srnflab
