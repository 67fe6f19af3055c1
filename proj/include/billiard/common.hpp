#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace billiard {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        double n = norm();
        return {x / n, y / n};
    }
    // 90 degree counterclockwise rotation.
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 rotate(Vec2 v, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Signed angle taking `from` to `to`, counterclockwise positive, in (-pi, pi].
inline double signed_angle(Vec2 from, Vec2 to) {
    return std::atan2(from.cross(to), from.dot(to));
}

// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

struct BilliardError : std::runtime_error {
    explicit BilliardError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidSpec : BilliardError {
    using BilliardError::BilliardError;
};
struct DegenerateCap : BilliardError {
    using BilliardError::BilliardError;
};
struct OutOfRange : BilliardError {
    using BilliardError::BilliardError;
};
struct UnsupportedPiece : BilliardError {
    using BilliardError::BilliardError;
};
struct CornerHit : BilliardError {
    using BilliardError::BilliardError;
};
struct GrazingDiscard : BilliardError {
    using BilliardError::BilliardError;
};
struct SolverStall : BilliardError {
    using BilliardError::BilliardError;
};
struct NoCollision : BilliardError {
    using BilliardError::BilliardError;
};
struct AngleTooFlat : BilliardError {
    using BilliardError::BilliardError;
};
struct ExcursionTooLong : BilliardError {
    using BilliardError::BilliardError;
};
struct NotAWindowExcursion : BilliardError {
    using BilliardError::BilliardError;
};
struct SplitUndefined : BilliardError {
    using BilliardError::BilliardError;
};
struct NoContractionFound : BilliardError {
    using BilliardError::BilliardError;
};
struct CellMismatch : BilliardError {
    using BilliardError::BilliardError;
};
struct CellUnreachable : BilliardError {
    using BilliardError::BilliardError;
};
struct InsufficientData : BilliardError {
    using BilliardError::BilliardError;
};
struct InsufficientExcursions : BilliardError {
    using BilliardError::BilliardError;
};
struct ObservableUndefined : BilliardError {
    using BilliardError::BilliardError;
};
struct InsufficientTail : BilliardError {
    using BilliardError::BilliardError;
};

}  // namespace billiard
