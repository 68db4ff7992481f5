#pragma once

#include "drivemap/types.hpp"

#include <Eigen/Geometry>

namespace drivemap {

/// Axis-angle magnitudes below this use the second-order series of Rodrigues' formula.
inline constexpr double kSmallAngle = 1e-8;

/// Proper rotation in SO(3), stored as a 3x3 matrix.
class Rotation {
 public:
  Rotation() = default;

  /// Rodrigues' formula. The zero vector maps to the exact identity.
  static Rotation from_axis_angle(const Vec3& axis_angle);
  /// Accepts any unit quaternion (w, x, y, z); it is normalised first.
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  /// Wraps a matrix without re-orthonormalising it. Use `is_valid` to check.
  static Rotation from_matrix(const Mat3& m);

  const Mat3& matrix() const noexcept {
    return matrix_;
  }
  /// Unit quaternion with non-negative w.
  Eigen::Quaterniond quaternion() const;
  /// Log map, angle in [0, pi].
  Vec3 axis_angle() const;

  Rotation inverse() const {
    return from_matrix(matrix_.transpose());
  }
  Rotation operator*(const Rotation& rhs) const {
    return from_matrix(matrix_ * rhs.matrix_);
  }
  Vec3 operator*(const Vec3& v) const {
    return matrix_ * v;
  }

  bool is_identity() const {
    return matrix_ == Mat3::Identity();
  }
  /// Orthogonal with det = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;

 private:
  Mat3 matrix_ = Mat3::Identity();
};

inline Rotation rodrigues(const Vec3& axis_angle) {
  return Rotation::from_axis_angle(axis_angle);
}

/// Rotation of `degrees` about a (not necessarily unit) axis.
Rotation rotation_about(const Vec3& axis, double degrees);

inline constexpr double kPi = 3.14159265358979323846;

inline double degrees(double radians) {
  return radians * 180.0 / kPi;
}
inline double radians(double degrees) {
  return degrees * kPi / 180.0;
}

} // namespace drivemap
