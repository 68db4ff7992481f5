#pragma once

// Parametric face forward map:
//   T_P = T + B_S(beta) + B_P(theta) + B_E(psi)
//   M   = global * LBS(T_P, J(beta), theta, W) + translation
// The expression deformation B_E(psi) is reported separately, in template space, so it is
// independent of identity and pose by construction.

#include "drivemap/assets.hpp"
#include "drivemap/clip_bundle.hpp"
#include "drivemap/rotation.hpp"
#include "drivemap/types.hpp"

#include <span>
#include <vector>

namespace drivemap {

/// x -> rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const {
    return rotation * p + translation;
  }
  RigidTransform then(const RigidTransform& outer) const {
    return RigidTransform{outer.rotation * rotation, outer.rotation * translation + outer.translation};
  }
};

struct PosedMesh {
  Vertices vertices;         // N_total x 3 posed positions
  Vertices expr_deformation; // N_total x 3, zero rows for inner-mouth vertices
  Vertices joints_posed;     // K x 3
  int base_vertex_count = 0;
};

Vertices shape_offset(const FaceModelAssets& assets, const Eigen::VectorXd& beta);
Vertices expression_offset(const FaceModelAssets& assets, const Eigen::VectorXd& psi);

/// Local joint rotations of the rig. The root stays identity: the global rotation is applied to
/// the skinned mesh afterwards. Throws DimensionError if a pose slot has no joint but is non-zero.
std::vector<Rotation> joint_rotations(const FaceModelAssets& assets, const PoseParams& pose);

/// Flattened (R_k - I) for every non-root joint, 9 * (K - 1) values.
Eigen::VectorXd pose_corrective_features(std::span<const Rotation> local_rotations);
Vertices pose_corrective_offset(const FaceModelAssets& assets, std::span<const Rotation> local_rotations);
Vertices pose_corrective_offset(const FaceModelAssets& assets, const PoseParams& pose);

/// joint_regressor * shaped_vertices.
Vertices regress_joints(const FaceModelAssets& assets, const Vertices& shaped_vertices);

/// World transform of every joint: rotation about the posed parent chain, keeping the joint's
/// rest location attached to its parent. Parents must precede children.
std::vector<RigidTransform> joint_world_transforms(
    const Vertices& rest_joints,
    std::span<const Rotation> local_rotations,
    std::span<const int> parents);

/// v' = sum_k w_{v,k} G_k(v). Throws PreconditionError if a weight row is negative or does not
/// sum to one within 1e-6. All-identity rotations return the input unchanged.
Vertices linear_blend_skinning(
    const Vertices& rest_vertices,
    const Vertices& rest_joints,
    std::span<const Rotation> local_rotations,
    const Eigen::MatrixXd& blend_weights,
    std::span<const int> parents);

/// Ring layout of the procedural inner-mouth cap: rings * segments == count, with
/// segments closest to twice the ring count. Throws PreconditionError if no layout with
/// at least 2 rings and 3 segments exists.
struct InnerMouthLayout {
  int rings = 0;
  int segments = 0;
};
InnerMouthLayout inner_mouth_layout(int count);

/// Rest-space inner mouth: a half-sphere whose centre is the midpoint of the jaw joint and the
/// lip anchor vertex, with radius half their distance. The bowl opens toward the lips, so its
/// back pole touches the jaw joint. Rings run from near the back pole out to the rim.
Vertices inner_mouth_rest_vertices(
    const FaceModelAssets& assets,
    const Vertices& shaped_vertices,
    const Vertices& rest_joints);

/// Triangles over the inner-mouth rings, with vertex indices offset by `first_vertex`.
Faces inner_mouth_faces(int count, int first_vertex);

/// Appends the inner-mouth vertices, moved rigidly by the jaw's world transform. They are not
/// skinned and their expression deformation rows are zero.
PosedMesh extend_inner_mouth(
    const FaceModelAssets& assets,
    const PosedMesh& mesh,
    const Vertices& inner_rest,
    const RigidTransform& jaw_world);

/// Full forward map including the inner mouth.
PosedMesh evaluate_mesh(
    const FaceModelAssets& assets,
    const Eigen::VectorXd& beta,
    const Eigen::VectorXd& psi,
    const PoseParams& pose);

/// Triangles that take part in rasterisation: head-masked template faces plus the inner mouth.
Faces render_faces(const FaceModelAssets& assets);

/// Template vertices followed by the inner mouth built at beta = 0.
Vertices extended_template(const FaceModelAssets& assets);

} // namespace drivemap
