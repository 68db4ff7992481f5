#pragma once

#include "drivemap/types.hpp"

#include <cstdint>
#include <vector>

namespace drivemap {

/// Objects closer than this (camera-space z) are treated as behind the camera.
inline constexpr double kNearPlane = 1e-6;

/// Pinhole camera in OpenCV convention: x right, y down, z forward.
/// A world point p maps to p_cam = rotation * p + translation.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 1;
  int height = 1;

  /// Throws PreconditionError unless fx, fy > 0, width, height >= 1 and the
  /// extrinsic rotation is proper within 1e-6.
  void validate() const;

  /// Same view at another resolution; intrinsics scale with the image.
  Camera with_resolution(int new_width, int new_height) const;
};

struct Projection {
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> pixels;
  Eigen::VectorXd depth;
  std::vector<std::uint8_t> behind_camera;
};

/// u = fx * x / z + cx, v = fy * y / z + cy on camera-space coordinates.
/// Points with z <= kNearPlane are flagged and their pixel coordinates left at zero.
Projection project(const Camera& camera, const Vertices& points);

} // namespace drivemap
