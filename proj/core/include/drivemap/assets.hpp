#pragma once

#include "drivemap/clip_bundle.hpp"
#include "drivemap/tensor_container.hpp"
#include "drivemap/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace drivemap {

/// Deformation scale of the reference face model's training corpus.
inline constexpr double kReferenceDeformationSigma = 0.0104;

/// Joint slots of the face rig. Joints past kEyeRightJoint chain off the root.
enum JointSlot : int {
  kRootJoint = 0,
  kNeckJoint = 1,
  kJawJoint = 2,
  kEyeLeftJoint = 3,
  kEyeRightJoint = 4,
};

/// Immutable face-model data. Blendshape bases are (3 * N_v) x n matrices whose row 3v + a
/// holds axis a of vertex v.
struct FaceModelAssets {
  Vertices template_vertices;
  Faces faces;
  Eigen::MatrixXd shape_basis;
  Eigen::MatrixXd expr_basis;
  Eigen::MatrixXd pose_basis;
  Eigen::MatrixXd blend_weights;   // N_v x K, rows sum to one
  Eigen::MatrixXd joint_regressor; // K x N_v
  std::vector<int> joint_parents;  // parent[0] == -1, parent[k] < k
  std::vector<std::uint8_t> head_vertex_mask;
  int inner_mouth_count = 0;
  int lip_anchor_vertex = 0;
  double deformation_sigma = kReferenceDeformationSigma;

  int vertex_count() const {
    return static_cast<int>(template_vertices.rows());
  }
  int total_vertex_count() const {
    return vertex_count() + inner_mouth_count;
  }
  int n_beta() const {
    return static_cast<int>(shape_basis.cols());
  }
  int n_psi() const {
    return static_cast<int>(expr_basis.cols());
  }
  int n_pose_corrective() const {
    return static_cast<int>(pose_basis.cols());
  }
  int joint_count() const {
    return static_cast<int>(joint_parents.size());
  }
  BundleDims dims() const {
    return BundleDims{n_beta(), n_psi()};
  }

  /// Throws PreconditionError describing the first violated invariant.
  void validate() const;
};

TensorContainer assets_to_container(const FaceModelAssets& assets);
FaceModelAssets assets_from_container(const TensorContainer& container);
void save_assets(const FaceModelAssets& assets, const std::filesystem::path& path);
FaceModelAssets load_assets(const std::filesystem::path& path);

struct SyntheticAssetConfig {
  std::uint64_t seed = 0;
  int n_vertices = 642; // must be an icosphere count 10 * 4^k + 2
  int n_beta = 150;
  int n_psi = 65;
  int n_joints = 5;
  int inner_mouth_count = 200;
};

/// Vertex count of an icosahedron subdivided `level` times.
int icosphere_vertex_count(int level);

/// Seeded stand-in for licensed face-model assets: an ellipsoidal icosphere with
/// QR-orthonormalised Gaussian bases, a root/neck/jaw/eye_l/eye_r rig and
/// distance-weighted skinning. Pure function of the config.
FaceModelAssets generate_synthetic_assets(const SyntheticAssetConfig& config);

/// Camera looking at the synthetic head from +z at distance `distance`.
Camera default_synthetic_camera(int width, int height, double distance = 5.0);

struct SyntheticClipConfig {
  std::uint64_t seed = 0;
  int n_frames = 16;
  double fps = 25.0;
  int width = 512;
  int height = 512;
  /// Upper bound of the per-clip expression amplitude.
  double expression_scale = 1.0;
};

/// Smooth random clip whose dimensions match `assets`.
ClipBundle generate_synthetic_clip(const FaceModelAssets& assets, const SyntheticClipConfig& config);

} // namespace drivemap
