#include "drivemap/rotation.hpp"

#include <cmath>

namespace drivemap {

Rotation Rotation::from_axis_angle(const Vec3& v) {
  Rotation r;
  const double theta2 = v.squaredNorm();
  if (theta2 == 0.0) {
    return r;
  }
  Mat3 k;
  k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  const double theta = std::sqrt(theta2);
  double a = 0.0;
  double b = 0.0;
  if (theta < kSmallAngle) {
    // sin(t)/t and (1 - cos t)/t^2 to second order.
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  r.matrix_ = Mat3::Identity() + a * k + b * (k * k);
  return r;
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  return from_matrix(q.normalized().toRotationMatrix());
}

Rotation Rotation::from_matrix(const Mat3& m) {
  Rotation r;
  r.matrix_ = m;
  return r;
}

Eigen::Quaterniond Rotation::quaternion() const {
  Eigen::Quaterniond q(matrix_);
  q.normalize();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

Vec3 Rotation::axis_angle() const {
  const Eigen::Quaterniond q = quaternion();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s == 0.0) {
    return Vec3::Zero();
  }
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

bool Rotation::is_valid(double tol) const {
  if (!matrix_.allFinite()) {
    return false;
  }
  const double ortho = (matrix_.transpose() * matrix_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(matrix_.determinant() - 1.0) <= tol;
}

Rotation rotation_about(const Vec3& axis, double deg) {
  return Rotation::from_axis_angle(axis.normalized() * radians(deg));
}

} // namespace drivemap
