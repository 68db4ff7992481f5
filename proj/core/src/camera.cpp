#include "drivemap/camera.hpp"

#include "drivemap/errors.hpp"

#include <cmath>
#include <string>

namespace drivemap {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw PreconditionError("camera focal lengths must be positive");
  }
  if (width < 1 || height < 1) {
    throw PreconditionError(
        "camera resolution must be at least 1x1, got " + std::to_string(width) + "x" +
        std::to_string(height));
  }
  if (!std::isfinite(cx) || !std::isfinite(cy) || !translation.allFinite()) {
    throw PreconditionError("camera parameters must be finite");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-6) || std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw PreconditionError("camera extrinsic rotation is not a proper rotation");
  }
}

Camera Camera::with_resolution(int new_width, int new_height) const {
  Camera c = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  c.fx *= sx;
  c.cx *= sx;
  c.fy *= sy;
  c.cy *= sy;
  c.width = new_width;
  c.height = new_height;
  return c;
}

Projection project(const Camera& camera, const Vertices& points) {
  const auto n = points.rows();
  Projection out;
  out.pixels.setZero(n, 2);
  out.depth.resize(n);
  out.behind_camera.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = camera.rotation * points.row(i).transpose() + camera.translation;
    out.depth[i] = p.z();
    if (!(p.z() > kNearPlane)) {
      out.behind_camera[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    out.pixels(i, 0) = camera.fx * p.x() / p.z() + camera.cx;
    out.pixels(i, 1) = camera.fy * p.y() / p.z() + camera.cy;
  }
  return out;
}

} // namespace drivemap
