#pragma once

// Deterministic hard rasteriser.
//
// Pixel (x, y) is sampled at its centre (x + 0.5, y + 0.5). Shared edges follow the top-left
// fill rule, so a pixel centre on an edge between two triangles belongs to exactly one of them.
// The nearest covering triangle wins; depth ties go to the lower face index. There is no
// backface culling. Triangles with any vertex at z <= kNearPlane are dropped whole.

#include "drivemap/camera.hpp"
#include "drivemap/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace drivemap {

struct RasterBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> face_index; // H*W, -1 = background
  std::vector<double> barycentric;      // H*W*3, perspective-correct, zero on background
  std::vector<double> depth;            // H*W camera-space z, zero on background

  std::size_t pixel(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  bool covered(int x, int y) const {
    return face_index[pixel(x, y)] >= 0;
  }
  std::size_t covered_count() const;
};

struct RasterOptions {
  /// Worker threads over scanline bands; <= 0 resolves through resolve_thread_count().
  int threads = 0;
};

RasterBuffer rasterize(
    const Vertices& vertices,
    const Faces& faces,
    const Camera& camera,
    const RasterOptions& options = {});

/// Coverage query at arbitrary screen positions, using the same fill rule and depth test.
struct PointSample {
  std::int32_t face = -1;
  Vec3 barycentric = Vec3::Zero();
  double depth = 0.0;
};

std::vector<PointSample> rasterize_points(
    const Vertices& vertices,
    const Faces& faces,
    const Camera& camera,
    std::span<const Eigen::Vector2d> screen_points);

/// H x W x C image, row-major with channels innermost.
struct AttributeImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Barycentric interpolation of per-vertex rows over covered pixels; background is zero.
/// Throws DimensionError when `values` has fewer rows than the faces reference.
AttributeImage interpolate_attribute(
    const RasterBuffer& raster,
    const Faces& faces,
    const Eigen::MatrixXd& values);

} // namespace drivemap
