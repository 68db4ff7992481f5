#pragma once

// 45-channel driver map.
//
//   channels  0..41  sinusoidal encoding of normalised template coordinates, axis-grouped:
//                    sin x (k = 0..6), cos x, sin y, cos y, sin z, cos z
//   channels 42..44  expression deformation (dx, dy, dz) divided by the asset sigma
//
// The live mesh decides where each value lands; the values themselves are template-space
// properties. Off-mesh pixels are zero in every channel.

#include "drivemap/assets.hpp"
#include "drivemap/camera.hpp"
#include "drivemap/face_model.hpp"
#include "drivemap/raster.hpp"
#include "drivemap/tensor_container.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace drivemap {

inline constexpr int kPositionalOctaves = 7;
inline constexpr int kPositionalChannels = 3 * 2 * kPositionalOctaves;
inline constexpr int kDeformationChannels = 3;
inline constexpr int kDriverMapChannels = kPositionalChannels + kDeformationChannels;
inline constexpr int kFirstDeformationChannel = kPositionalChannels;

/// Map construction variants. The ablations zero a channel group and keep the tensor shape.
enum class MapMode {
  Full,
  NoDeformation,
  NoPosenc,
};

std::string_view to_string(MapMode mode);
/// Accepts "full", "no_deformation", "no_posenc"; throws PreconditionError otherwise.
MapMode parse_map_mode(std::string_view text);

/// Channel index of sin/cos at `octave` for `axis` (0 = x, 1 = y, 2 = z).
constexpr int positional_channel(int axis, bool cosine, int octave, int octaves = kPositionalOctaves) {
  return axis * 2 * octaves + (cosine ? octaves : 0) + octave;
}

/// gamma(p) with frequencies 2^0 .. 2^(octaves - 1), axis-grouped. Returns 6 * octaves values.
std::vector<double> positional_encoding(const Vec3& p, int octaves = kPositionalOctaves);

struct EncodedTemplate {
  Eigen::MatrixXd per_vertex_pe; // N_total x 42
  Vertices normalized;           // N_total x 3
  Vec3 mean = Vec3::Zero();
  double scale = 1.0;
};

/// p' = (p - mean) / max |p - mean| over all components; encodes every vertex.
/// Throws PreconditionError when the set is empty or all vertices coincide.
EncodedTemplate normalize_template(const Vertices& template_vertices);

/// normalize_template over the template plus the rest inner mouth.
EncodedTemplate encode_template(const FaceModelAssets& assets);

/// Per-vertex channel values handed to the rasteriser.
struct VertexAttributes {
  Eigen::MatrixXd positional;  // N_total x 42
  Eigen::MatrixXd deformation; // N_total x 3, already divided by sigma
};

VertexAttributes vertex_attributes(const EncodedTemplate& encoded, const PosedMesh& mesh, double sigma);

struct DriverMap {
  int width = 0;
  int height = 0;
  MapMode mode = MapMode::Full;
  double sigma = kReferenceDeformationSigma;
  std::vector<float> data; // 45 x H x W

  float at(int channel, int y, int x) const {
    return data[(static_cast<std::size_t>(channel) * height + y) * width + x];
  }
  std::span<const float> channel(int c) const {
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    return std::span<const float>(data).subspan(static_cast<std::size_t>(c) * plane, plane);
  }
};

/// Writes interpolated attributes into a map on fixed raster geometry.
DriverMap assemble_driver_map(
    const RasterBuffer& raster,
    const Faces& faces,
    const VertexAttributes& attributes,
    MapMode mode,
    double sigma);

/// evaluate_mesh -> rasterize -> interpolate. Resolution comes from the camera.
DriverMap build_driver_map(
    const FaceModelAssets& assets,
    const EncodedTemplate& encoded,
    const Eigen::VectorXd& beta,
    const Eigen::VectorXd& psi,
    const PoseParams& pose,
    const Camera& camera,
    MapMode mode = MapMode::Full,
    const RasterOptions& options = {});

/// Cross-identity substitution: the reference identity and camera with the driver's
/// expression and pose. Nothing beyond build_driver_map is applied.
DriverMap retarget(
    const FaceModelAssets& assets,
    const EncodedTemplate& encoded,
    const Eigen::VectorXd& beta_ref,
    const Camera& camera_ref,
    const Eigen::VectorXd& psi_drv,
    const PoseParams& pose_drv,
    MapMode mode = MapMode::Full,
    const RasterOptions& options = {});

/// Non-spatial baseline: [beta, psi, pose.flatten()] tiled over a grid x grid plane.
struct BroadcastGrid {
  int channels = 0;
  int size = 0;
  std::vector<float> data; // C x size x size
};

BroadcastGrid raw_vector_broadcast(
    const Eigen::VectorXd& beta,
    const Eigen::VectorXd& psi,
    const PoseParams& pose,
    int grid = 64);

/// Per-pixel deformation magnitude ||(dx, dy, dz)||, H x W.
std::vector<float> deformation_magnitude(const DriverMap& map);

/// Container entries: driver_map (45 x H x W float32), meta_mode (int32), meta_sigma (float64).
TensorContainer driver_map_to_container(const DriverMap& map);
DriverMap driver_map_from_container(const TensorContainer& container);

} // namespace drivemap
