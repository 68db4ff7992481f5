#include "drivemap/face_model.hpp"

#include "drivemap/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace drivemap {

namespace {

void check_length(const Eigen::VectorXd& v, int expected, const char* what) {
  if (v.size() != expected) {
    throw DimensionError(
        std::string(what) + " has " + std::to_string(v.size()) + " coefficients, basis expects " +
        std::to_string(expected));
  }
}

Vertices basis_offset(const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs) {
  const Eigen::VectorXd flat = basis * coeffs;
  return Eigen::Map<const Vertices>(flat.data(), flat.size() / 3, 3);
}

void set_slot(std::vector<Rotation>& out, int slot, const Vec3& aa, const char* name) {
  if (slot < static_cast<int>(out.size())) {
    out[static_cast<std::size_t>(slot)] = Rotation::from_axis_angle(aa);
  } else if (!aa.isZero(0.0)) {
    throw DimensionError(std::string(name) + " rotation is set but the rig has no such joint");
  }
}

} // namespace

Vertices shape_offset(const FaceModelAssets& assets, const Eigen::VectorXd& beta) {
  check_length(beta, assets.n_beta(), "shape");
  return basis_offset(assets.shape_basis, beta);
}

Vertices expression_offset(const FaceModelAssets& assets, const Eigen::VectorXd& psi) {
  check_length(psi, assets.n_psi(), "expression");
  return basis_offset(assets.expr_basis, psi);
}

std::vector<Rotation> joint_rotations(const FaceModelAssets& assets, const PoseParams& pose) {
  std::vector<Rotation> out(static_cast<std::size_t>(assets.joint_count()));
  set_slot(out, kNeckJoint, pose.neck_rotation, "neck");
  set_slot(out, kJawJoint, pose.jaw_rotation, "jaw");
  set_slot(out, kEyeLeftJoint, pose.eye_rotations[0], "left eye");
  set_slot(out, kEyeRightJoint, pose.eye_rotations[1], "right eye");
  return out;
}

Eigen::VectorXd pose_corrective_features(std::span<const Rotation> local_rotations) {
  const auto k = static_cast<Eigen::Index>(local_rotations.size());
  Eigen::VectorXd f(9 * std::max<Eigen::Index>(k - 1, 0));
  for (Eigen::Index j = 1; j < k; ++j) {
    const Mat3 d = local_rotations[static_cast<std::size_t>(j)].matrix() - Mat3::Identity();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        f[9 * (j - 1) + 3 * r + c] = d(r, c);
      }
    }
  }
  return f;
}

Vertices pose_corrective_offset(const FaceModelAssets& assets, std::span<const Rotation> local_rotations) {
  const Eigen::VectorXd f = pose_corrective_features(local_rotations);
  check_length(f, assets.n_pose_corrective(), "pose corrective features");
  return basis_offset(assets.pose_basis, f);
}

Vertices pose_corrective_offset(const FaceModelAssets& assets, const PoseParams& pose) {
  const auto rotations = joint_rotations(assets, pose);
  return pose_corrective_offset(assets, rotations);
}

Vertices regress_joints(const FaceModelAssets& assets, const Vertices& shaped_vertices) {
  if (shaped_vertices.rows() != assets.vertex_count()) {
    throw DimensionError("regress_joints expects N_v shaped vertices");
  }
  return assets.joint_regressor * shaped_vertices;
}

std::vector<RigidTransform> joint_world_transforms(
    const Vertices& rest_joints,
    std::span<const Rotation> local_rotations,
    std::span<const int> parents) {
  const std::size_t k = parents.size();
  if (local_rotations.size() != k || static_cast<std::size_t>(rest_joints.rows()) != k) {
    throw DimensionError("joint count mismatch between rotations, joints and parents");
  }
  std::vector<RigidTransform> world(k);
  std::vector<Vec3> posed(k);
  for (std::size_t j = 0; j < k; ++j) {
    const Vec3 rest = rest_joints.row(static_cast<Eigen::Index>(j)).transpose();
    const int p = parents[j];
    Mat3 r = local_rotations[j].matrix();
    Vec3 position = rest;
    if (p >= 0) {
      if (static_cast<std::size_t>(p) >= j) {
        throw PreconditionError("joint parents must precede their children");
      }
      r = world[static_cast<std::size_t>(p)].rotation * r;
      position = world[static_cast<std::size_t>(p)].apply(rest);
    }
    posed[j] = position;
    world[j] = RigidTransform{r, position - r * rest};
  }
  return world;
}

Vertices linear_blend_skinning(
    const Vertices& rest_vertices,
    const Vertices& rest_joints,
    std::span<const Rotation> local_rotations,
    const Eigen::MatrixXd& blend_weights,
    std::span<const int> parents) {
  const auto n = rest_vertices.rows();
  const auto k = static_cast<Eigen::Index>(parents.size());
  if (blend_weights.rows() != n || blend_weights.cols() != k) {
    throw DimensionError("blend weights must be N x K");
  }
  for (Eigen::Index v = 0; v < n; ++v) {
    if (blend_weights.row(v).minCoeff() < 0.0 || std::abs(blend_weights.row(v).sum() - 1.0) > 1e-6) {
      throw PreconditionError("blend weight row " + std::to_string(v) + " is not normalised");
    }
  }
  const auto world = joint_world_transforms(rest_joints, local_rotations, parents);
  bool identity = true;
  for (const auto& r : local_rotations) {
    identity = identity && r.is_identity();
  }
  if (identity) {
    return rest_vertices;
  }

  // Blend the 3x4 transforms: row k of `stacked` is [R_k row-major | t_k].
  Eigen::Matrix<double, Eigen::Dynamic, 12> stacked(k, 12);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& g = world[static_cast<std::size_t>(j)];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        stacked(j, 3 * r + c) = g.rotation(r, c);
      }
      stacked(j, 9 + r) = g.translation[r];
    }
  }
  const Eigen::Matrix<double, Eigen::Dynamic, 12> blended = blend_weights * stacked;
  Vertices out(n, 3);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto b = blended.row(v);
    const double x = rest_vertices(v, 0);
    const double y = rest_vertices(v, 1);
    const double z = rest_vertices(v, 2);
    for (int r = 0; r < 3; ++r) {
      out(v, r) = b(3 * r) * x + b(3 * r + 1) * y + b(3 * r + 2) * z + b(9 + r);
    }
  }
  return out;
}

InnerMouthLayout inner_mouth_layout(int count) {
  InnerMouthLayout best;
  int best_score = -1;
  for (int segments = 3; segments <= count / 2; ++segments) {
    if (count % segments != 0) {
      continue;
    }
    const int rings = count / segments;
    const int score = std::abs(segments - 2 * rings);
    if (best_score < 0 || score < best_score) {
      best = InnerMouthLayout{rings, segments};
      best_score = score;
    }
  }
  if (best_score < 0) {
    throw PreconditionError(
        "inner mouth count " + std::to_string(count) +
        " has no ring layout (needs rings >= 2 and segments >= 3 with rings * segments == count)");
  }
  return best;
}

Vertices inner_mouth_rest_vertices(
    const FaceModelAssets& assets,
    const Vertices& shaped_vertices,
    const Vertices& rest_joints) {
  const int m = assets.inner_mouth_count;
  if (m == 0) {
    return Vertices(0, 3);
  }
  if (assets.lip_anchor_vertex < 0 || assets.lip_anchor_vertex >= shaped_vertices.rows()) {
    throw PreconditionError("lip anchor vertex index out of range");
  }
  if (rest_joints.rows() <= kJawJoint) {
    throw PreconditionError("inner mouth requires a jaw joint");
  }
  const auto layout = inner_mouth_layout(m);
  const Vec3 jaw = rest_joints.row(kJawJoint).transpose();
  const Vec3 lip = shaped_vertices.row(assets.lip_anchor_vertex).transpose();
  const Vec3 d = lip - jaw;
  const double len = d.norm();
  if (!(len > 0.0)) {
    throw PreconditionError("lip anchor coincides with the jaw joint");
  }
  const Vec3 axis = d / len;
  const Vec3 center = jaw + 0.5 * d;
  const double radius = 0.5 * len;
  Vec3 helper = Vec3::UnitX();
  if (std::abs(axis.x()) > 0.9) {
    helper = Vec3::UnitY();
  }
  const Vec3 e1 = axis.cross(helper).normalized();
  const Vec3 e2 = axis.cross(e1);

  Vertices out(m, 3);
  for (int i = 0; i < layout.rings; ++i) {
    const double polar = 0.5 * kPi * (i + 1) / layout.rings;
    for (int j = 0; j < layout.segments; ++j) {
      const double az = 2.0 * kPi * j / layout.segments;
      const Vec3 dir = -std::cos(polar) * axis + std::sin(polar) * (std::cos(az) * e1 + std::sin(az) * e2);
      out.row(i * layout.segments + j) = (center + radius * dir).transpose();
    }
  }
  return out;
}

Faces inner_mouth_faces(int count, int first_vertex) {
  if (count == 0) {
    return Faces(0, 3);
  }
  const auto layout = inner_mouth_layout(count);
  const int s = layout.segments;
  std::vector<std::array<int, 3>> tris;
  // Cap the innermost ring with a fan.
  for (int j = 1; j + 1 < s; ++j) {
    tris.push_back({0, j + 1, j});
  }
  for (int i = 0; i + 1 < layout.rings; ++i) {
    for (int j = 0; j < s; ++j) {
      const int a = i * s + j;
      const int b = i * s + (j + 1) % s;
      const int c = (i + 1) * s + j;
      const int d = (i + 1) * s + (j + 1) % s;
      tris.push_back({a, c, d});
      tris.push_back({a, d, b});
    }
  }
  Faces f(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      f(static_cast<Eigen::Index>(t), k) = tris[t][k] + first_vertex;
    }
  }
  return f;
}

PosedMesh extend_inner_mouth(
    const FaceModelAssets& assets,
    const PosedMesh& mesh,
    const Vertices& inner_rest,
    const RigidTransform& jaw_world) {
  if (inner_rest.rows() != assets.inner_mouth_count) {
    throw DimensionError("inner mouth vertex count does not match assets");
  }
  if (assets.inner_mouth_count == 0) {
    return mesh;
  }
  const auto n = mesh.vertices.rows();
  const auto m = inner_rest.rows();
  PosedMesh out;
  out.base_vertex_count = mesh.base_vertex_count;
  out.joints_posed = mesh.joints_posed;
  out.vertices.resize(n + m, 3);
  out.vertices.topRows(n) = mesh.vertices;
  for (Eigen::Index i = 0; i < m; ++i) {
    out.vertices.row(n + i) = jaw_world.apply(inner_rest.row(i).transpose()).transpose();
  }
  out.expr_deformation.resize(n + m, 3);
  out.expr_deformation.topRows(n) = mesh.expr_deformation;
  out.expr_deformation.bottomRows(m).setZero();
  return out;
}

PosedMesh evaluate_mesh(
    const FaceModelAssets& assets,
    const Eigen::VectorXd& beta,
    const Eigen::VectorXd& psi,
    const PoseParams& pose) {
  const Vertices shaped = assets.template_vertices + shape_offset(assets, beta);
  const Vertices rest_joints = regress_joints(assets, shaped);
  const Vertices expr = expression_offset(assets, psi);
  const auto rotations = joint_rotations(assets, pose);
  const Vertices tp = shaped + pose_corrective_offset(assets, rotations) + expr;

  const Vertices skinned =
      linear_blend_skinning(tp, rest_joints, rotations, assets.blend_weights, assets.joint_parents);
  const auto world = joint_world_transforms(rest_joints, rotations, assets.joint_parents);

  const RigidTransform global{Rotation::from_axis_angle(pose.global_rotation).matrix(), pose.translation};
  const bool rigid_identity = global.rotation == Mat3::Identity() && global.translation.isZero(0.0);

  PosedMesh mesh;
  mesh.base_vertex_count = assets.vertex_count();
  mesh.expr_deformation = expr;
  if (rigid_identity) {
    mesh.vertices = skinned;
  } else {
    mesh.vertices = (skinned * global.rotation.transpose()).rowwise() + global.translation.transpose();
  }
  mesh.joints_posed.resize(assets.joint_count(), 3);
  for (int j = 0; j < assets.joint_count(); ++j) {
    const Vec3 p = world[static_cast<std::size_t>(j)].apply(rest_joints.row(j).transpose());
    mesh.joints_posed.row(j) = (rigid_identity ? p : global.apply(p)).transpose();
  }
  if (assets.inner_mouth_count == 0) {
    return mesh;
  }
  const Vertices inner = inner_mouth_rest_vertices(assets, shaped, rest_joints);
  const RigidTransform jaw_world = world[kJawJoint].then(global);
  return extend_inner_mouth(assets, mesh, inner, jaw_world);
}

Faces render_faces(const FaceModelAssets& assets) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index f = 0; f < assets.faces.rows(); ++f) {
    bool head = true;
    for (int k = 0; k < 3; ++k) {
      head = head && assets.head_vertex_mask[static_cast<std::size_t>(assets.faces(f, k))] != 0;
    }
    if (head) {
      keep.push_back(f);
    }
  }
  const Faces mouth = inner_mouth_faces(assets.inner_mouth_count, assets.vertex_count());
  Faces out(static_cast<Eigen::Index>(keep.size()) + mouth.rows(), 3);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = assets.faces.row(keep[i]);
  }
  out.bottomRows(mouth.rows()) = mouth;
  return out;
}

Vertices extended_template(const FaceModelAssets& assets) {
  const Vertices joints = regress_joints(assets, assets.template_vertices);
  const Vertices inner = inner_mouth_rest_vertices(assets, assets.template_vertices, joints);
  Vertices out(assets.vertex_count() + inner.rows(), 3);
  out.topRows(assets.vertex_count()) = assets.template_vertices;
  out.bottomRows(inner.rows()) = inner;
  return out;
}

} // namespace drivemap
