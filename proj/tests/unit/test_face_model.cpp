#include "drivemap/face_model.hpp"
#include "drivemap/errors.hpp"
#include "drivemap/rotation.hpp"

#include "harness.hpp"

#include <gtest/gtest.h>

using namespace drivemap;
using drivemap::testing::Gen;
using drivemap::testing::naive_lbs;
using drivemap::testing::small_assets;

// ---- rotation ----

TEST(Rotation, ZeroVectorIsExactIdentity) {
  EXPECT_TRUE(rodrigues(Vec3::Zero()).is_identity());
}

TEST(Rotation, HalfTurnAboutZ) {
  const Mat3 r = rodrigues(Vec3(0, 0, kPi)).matrix();
  EXPECT_LT((r - Vec3(-1, -1, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rotation, InverseAndOrthogonalityProperty) {
  Gen g(1);
  for (int i = 0; i < 500; ++i) {
    const Vec3 v = g.axis_angle(kPi);
    const Mat3 r = rodrigues(v).matrix();
    EXPECT_LT((r * rodrigues(-v).matrix() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    // The axis is fixed.
    if (v.norm() > 0) {
      EXPECT_LT((r * v - v).norm(), 1e-12);
    }
    // Trace formula recovers the angle on (0, pi).
    const double angle = std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
    if (v.norm() > 1e-3 && v.norm() < kPi - 1e-3) {
      EXPECT_NEAR(angle, v.norm(), 1e-9);
    }
  }
}

TEST(Rotation, SmallAngleSeriesIsContinuous) {
  const Vec3 axis = Vec3(1, 2, 3).normalized();
  const Mat3 below = rodrigues(axis * 0.99e-8).matrix();
  const Mat3 above = rodrigues(axis * 1.01e-8).matrix();
  EXPECT_LT((below - above).cwiseAbs().maxCoeff(), 1e-9);
  const Mat3 tiny = rodrigues(axis * 1e-12).matrix();
  EXPECT_LT((tiny.transpose() * tiny - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rotation, RepresentationsInterconvert) {
  Gen g(2);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v = g.axis_angle(kPi - 1e-6);
    const Rotation r = rodrigues(v);
    EXPECT_LT((r.axis_angle() - v).norm(), 1e-9);
    const Eigen::Quaterniond q = r.quaternion();
    EXPECT_GE(q.w(), 0.0);
    EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    EXPECT_LT((Rotation::from_quaternion(q).matrix() - r.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
    EXPECT_LT((Rotation::from_quaternion(neg).matrix() - r.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rotation, RotationAboutDegrees) {
  const Rotation r = rotation_about(Vec3(0, 0, 2), 90.0);
  EXPECT_LT((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-15);
  EXPECT_FALSE(Rotation::from_matrix(2.0 * Mat3::Identity()).is_valid());
}

// ---- blendshapes ----

TEST(Blendshapes, ZeroCoefficientsGiveZeroOffsets) {
  const auto& a = small_assets();
  EXPECT_TRUE(expression_offset(a, Eigen::VectorXd::Zero(a.n_psi())).isZero(0.0));
  EXPECT_TRUE(shape_offset(a, Eigen::VectorXd::Zero(a.n_beta())).isZero(0.0));
  EXPECT_TRUE(pose_corrective_offset(a, PoseParams{}).isZero(0.0));
}

TEST(Blendshapes, LinearityProperty) {
  const auto& a = small_assets();
  Gen g(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd p1 = g.vector(a.n_psi());
    const Eigen::VectorXd p2 = g.vector(a.n_psi());
    const double s = g.uniform(-3, 3);
    const double t = g.uniform(-3, 3);
    const Vertices lhs = expression_offset(a, s * p1 + t * p2);
    const Vertices rhs = s * expression_offset(a, p1) + t * expression_offset(a, p2);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
    const Vertices doubled = expression_offset(a, 2.0 * p1);
    EXPECT_LE((doubled - 2.0 * expression_offset(a, p1)).cwiseAbs().maxCoeff(), 1e-12);

    const Eigen::VectorXd b1 = g.vector(a.n_beta());
    const Eigen::VectorXd b2 = g.vector(a.n_beta());
    const Vertices sl = shape_offset(a, s * b1 + t * b2);
    const Vertices sr = s * shape_offset(a, b1) + t * shape_offset(a, b2);
    EXPECT_LE((sl - sr).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, sr.cwiseAbs().maxCoeff()));
  }
}

TEST(Blendshapes, OffsetMatchesBasisLayout) {
  const auto& a = small_assets();
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(a.n_psi());
  psi[2] = 1.0;
  const Vertices off = expression_offset(a, psi);
  for (int v = 0; v < a.vertex_count(); v += 17) {
    for (int ax = 0; ax < 3; ++ax) {
      EXPECT_EQ(off(v, ax), a.expr_basis(3 * v + ax, 2));
    }
  }
}

TEST(Blendshapes, LengthMismatchIsDimensionError) {
  const auto& a = small_assets();
  EXPECT_THROW(expression_offset(a, Eigen::VectorXd::Zero(a.n_psi() + 1)), DimensionError);
  EXPECT_THROW(shape_offset(a, Eigen::VectorXd::Zero(a.n_beta() - 1)), DimensionError);
}

TEST(PoseCorrectives, FeatureLayout) {
  std::vector<Rotation> rs(3);
  rs[1] = rodrigues(Vec3(0.1, 0, 0));
  const Eigen::VectorXd f = pose_corrective_features(rs);
  ASSERT_EQ(f.size(), 18);
  EXPECT_TRUE(f.tail(9).isZero(0.0));
  const Mat3 d = rs[1].matrix() - Mat3::Identity();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(f[3 * i + j], d(i, j));
    }
  }
}

// ---- joints and skinning ----

TEST(Joints, OneHotAndUniformRegressorRows) {
  auto a = small_assets();
  a.joint_regressor.setZero();
  a.joint_regressor(0, 17) = 1.0;
  a.joint_regressor.row(1).setConstant(1.0 / a.vertex_count());
  const Vertices j = regress_joints(a, a.template_vertices);
  EXPECT_EQ(j.row(0), a.template_vertices.row(17));
  const Eigen::RowVector3d centroid = a.template_vertices.colwise().mean();
  EXPECT_LT((j.row(1) - centroid).norm(), 1e-12);
}

TEST(Joints, RestJointsMatchMatrixProduct) {
  const auto& a = small_assets();
  const Vertices j = regress_joints(a, a.template_vertices);
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(a.joint_count(), 3);
  for (int k = 0; k < a.joint_count(); ++k) {
    for (int v = 0; v < a.vertex_count(); ++v) {
      for (int ax = 0; ax < 3; ++ax) {
        oracle(k, ax) += a.joint_regressor(k, v) * a.template_vertices(v, ax);
      }
    }
  }
  EXPECT_LT((Eigen::MatrixXd(j) - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Skinning, IdentityRotationsReturnInputExactly) {
  const auto& a = small_assets();
  const Vertices joints = regress_joints(a, a.template_vertices);
  const std::vector<Rotation> rs(static_cast<std::size_t>(a.joint_count()));
  const Vertices out = linear_blend_skinning(a.template_vertices, joints, rs, a.blend_weights, a.joint_parents);
  EXPECT_EQ(out, a.template_vertices);
}

TEST(Skinning, SingleJointAtOriginRotates) {
  Gen g(4);
  Vertices v(20, 3);
  for (int i = 0; i < 20; ++i) {
    v.row(i) = g.vec3().transpose();
  }
  const Vertices joints = Vertices::Zero(1, 3);
  const Rotation r = g.rotation();
  const std::vector<Rotation> rs{r};
  const std::vector<int> parents{-1};
  const Vertices out = linear_blend_skinning(v, joints, rs, Eigen::MatrixXd::Ones(20, 1), parents);
  for (int i = 0; i < 20; ++i) {
    EXPECT_LT((out.row(i).transpose() - r.matrix() * v.row(i).transpose()).norm(), 1e-14);
  }
}

TEST(Skinning, TwoJointChainMatchesNaiveOracle) {
  Gen g(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = g.integer(1, 60);
    Vertices v(n, 3);
    Eigen::MatrixXd w(n, 2);
    for (int i = 0; i < n; ++i) {
      v.row(i) = g.vec3().transpose();
      const double t = g.uniform();
      w(i, 0) = t;
      w(i, 1) = 1.0 - t;
    }
    Vertices joints(2, 3);
    joints.row(0) = g.vec3().transpose();
    joints.row(1) = g.vec3().transpose();
    const std::vector<Rotation> rs{g.rotation(), g.rotation()};
    const std::vector<int> parents{-1, 0};
    const Vertices fast = linear_blend_skinning(v, joints, rs, w, parents);
    const Vertices slow = naive_lbs(v, joints, rs, w, parents);
    EXPECT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Skinning, UnnormalisedWeightsRejected) {
  const Vertices v = Vertices::Zero(2, 3);
  const Vertices joints = Vertices::Zero(1, 3);
  const std::vector<Rotation> rs{rodrigues(Vec3(0.1, 0, 0))};
  const std::vector<int> parents{-1};
  Eigen::MatrixXd w(2, 1);
  w << 1.0, 0.9;
  EXPECT_THROW(linear_blend_skinning(v, joints, rs, w, parents), PreconditionError);
  w << 1.0, -0.0001;
  EXPECT_THROW(linear_blend_skinning(v, joints, rs, w, parents), PreconditionError);
}

TEST(Skinning, JointWorldTransformsKeepJointsAttached) {
  const auto& a = small_assets();
  Gen g(6);
  const Vertices joints = regress_joints(a, a.template_vertices);
  std::vector<Rotation> rs(static_cast<std::size_t>(a.joint_count()));
  for (auto& r : rs) {
    r = g.rotation();
  }
  const auto world = joint_world_transforms(joints, rs, a.joint_parents);
  for (int k = 1; k < a.joint_count(); ++k) {
    const int p = a.joint_parents[static_cast<std::size_t>(k)];
    // A child joint sits where its parent's transform carries it.
    const Vec3 via_parent = world[static_cast<std::size_t>(p)].apply(joints.row(k).transpose());
    const Vec3 own = world[static_cast<std::size_t>(k)].apply(joints.row(k).transpose());
    EXPECT_LT((via_parent - own).norm(), 1e-12);
  }
}

// ---- forward map ----

TEST(EvaluateMesh, AllZeroReproducesTemplate) {
  const auto& a = small_assets();
  const PosedMesh m = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi()), {});
  ASSERT_EQ(m.vertices.rows(), a.total_vertex_count());
  EXPECT_EQ(m.base_vertex_count, a.vertex_count());
  EXPECT_EQ(Vertices(m.vertices.topRows(a.vertex_count())), a.template_vertices);
  EXPECT_EQ(m.vertices, extended_template(a));
  EXPECT_TRUE(m.expr_deformation.isZero(0.0));
}

TEST(EvaluateMesh, ZeroPoseIsSumOfBlendshapes) {
  const auto& a = small_assets();
  Gen g(7);
  const Eigen::VectorXd beta = g.vector(a.n_beta());
  const Eigen::VectorXd psi = g.vector(a.n_psi());
  const PosedMesh m = evaluate_mesh(a, beta, psi, {});
  const Vertices expected = a.template_vertices + shape_offset(a, beta) + expression_offset(a, psi);
  EXPECT_LT((Vertices(m.vertices.topRows(a.vertex_count())) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EvaluateMesh, FullPoseMatchesComposedOracle) {
  const auto& a = small_assets();
  Gen g(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd beta = g.vector(a.n_beta());
    const Eigen::VectorXd psi = g.vector(a.n_psi());
    const PoseParams pose = g.pose(0.5);
    const PosedMesh m = evaluate_mesh(a, beta, psi, pose);
    const Vertices shaped = a.template_vertices + shape_offset(a, beta);
    const Vertices joints = regress_joints(a, shaped);
    const auto rs = joint_rotations(a, pose);
    const Vertices tp = shaped + pose_corrective_offset(a, rs) + expression_offset(a, psi);
    const Vertices skinned = naive_lbs(tp, joints, rs, a.blend_weights, a.joint_parents);
    const Mat3 rg = rodrigues(pose.global_rotation).matrix();
    for (int v = 0; v < a.vertex_count(); ++v) {
      const Vec3 expected = rg * skinned.row(v).transpose() + pose.translation;
      EXPECT_LT((m.vertices.row(v).transpose() - expected).norm(), 1e-10);
    }
  }
}

TEST(EvaluateMesh, ExpressionDeformationIgnoresIdentityAndPose) {
  const auto& a = small_assets();
  Gen g(9);
  const Eigen::VectorXd psi = g.vector(a.n_psi());
  const PosedMesh ref = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), psi, {});
  for (int i = 0; i < 10; ++i) {
    const PosedMesh m = evaluate_mesh(a, g.vector(a.n_beta()), psi, g.pose(0.5));
    EXPECT_EQ(m.expr_deformation, ref.expr_deformation);
  }
}

TEST(EvaluateMesh, DimensionMismatch) {
  const auto& a = small_assets();
  EXPECT_THROW(
      evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta() + 1), Eigen::VectorXd::Zero(a.n_psi()), {}), DimensionError);
  EXPECT_THROW(
      evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi() + 2), {}), DimensionError);
}

TEST(EvaluateMesh, MissingJointSlotRejectsNonZeroRotation) {
  SyntheticAssetConfig c;
  c.n_vertices = 42;
  c.n_beta = 2;
  c.n_psi = 2;
  c.n_joints = 3;
  c.inner_mouth_count = 0;
  const auto a = generate_synthetic_assets(c);
  PoseParams p;
  p.eye_rotations[0] = Vec3(0.1, 0, 0);
  EXPECT_THROW(joint_rotations(a, p), DimensionError);
  p.eye_rotations[0].setZero();
  EXPECT_NO_THROW(joint_rotations(a, p));
}

// ---- inner mouth ----

TEST(InnerMouth, LayoutFactorisation) {
  EXPECT_EQ(inner_mouth_layout(200).rings, 10);
  EXPECT_EQ(inner_mouth_layout(200).segments, 20);
  EXPECT_EQ(inner_mouth_layout(40).rings * inner_mouth_layout(40).segments, 40);
  EXPECT_THROW(inner_mouth_layout(7), PreconditionError);
  EXPECT_THROW(inner_mouth_layout(5), PreconditionError);
}

TEST(InnerMouth, ReferenceScaleVertexCount) {
  const auto& a = drivemap::testing::reference_assets();
  EXPECT_EQ(a.inner_mouth_count, 200);
  const PosedMesh m = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi()), {});
  EXPECT_EQ(m.vertices.rows(), a.vertex_count() + 200);
}

TEST(InnerMouth, HalfSphereGeometry) {
  const auto& a = small_assets();
  const Vertices joints = regress_joints(a, a.template_vertices);
  const Vertices inner = inner_mouth_rest_vertices(a, a.template_vertices, joints);
  ASSERT_EQ(inner.rows(), a.inner_mouth_count);
  const Vec3 jaw = joints.row(kJawJoint).transpose();
  const Vec3 lip = a.template_vertices.row(a.lip_anchor_vertex).transpose();
  const Vec3 center = 0.5 * (jaw + lip);
  const double radius = 0.5 * (lip - jaw).norm();
  const Vec3 axis = (lip - jaw).normalized();
  for (Eigen::Index i = 0; i < inner.rows(); ++i) {
    const Vec3 p = inner.row(i).transpose();
    EXPECT_NEAR((p - center).norm(), radius, 1e-12);
    // Bowl: every vertex lies on the jaw side of the rim plane.
    EXPECT_LE((p - center).dot(axis), 1e-12);
  }
}

TEST(InnerMouth, RowsHaveZeroDeformationAndFollowTheJaw) {
  const auto& a = small_assets();
  Gen g(10);
  const Eigen::VectorXd beta = g.vector(a.n_beta());
  const Eigen::VectorXd psi = g.vector(a.n_psi());
  PoseParams pose = g.pose(0.4);
  const PosedMesh m = evaluate_mesh(a, beta, psi, pose);
  const int nv = a.vertex_count();
  EXPECT_TRUE(m.expr_deformation.bottomRows(a.inner_mouth_count).isZero(0.0));

  const Vertices shaped = a.template_vertices + shape_offset(a, beta);
  const Vertices joints = regress_joints(a, shaped);
  const Vertices inner = inner_mouth_rest_vertices(a, shaped, joints);
  const auto world = joint_world_transforms(joints, joint_rotations(a, pose), a.joint_parents);
  const RigidTransform global{rodrigues(pose.global_rotation).matrix(), pose.translation};
  const RigidTransform jaw = world[kJawJoint].then(global);
  for (int i = 0; i < a.inner_mouth_count; ++i) {
    EXPECT_LT((m.vertices.row(nv + i).transpose() - jaw.apply(inner.row(i).transpose())).norm(), 1e-12);
  }
  // Pairwise distances are preserved (rigid motion).
  const Vec3 d_rest = inner.row(0) - inner.row(a.inner_mouth_count - 1);
  const Vec3 d_posed = m.vertices.row(nv) - m.vertices.row(nv + a.inner_mouth_count - 1);
  EXPECT_NEAR(d_rest.norm(), d_posed.norm(), 1e-12);
}

TEST(InnerMouth, ZeroCountLeavesMeshUnchanged) {
  auto a = small_assets();
  a.inner_mouth_count = 0;
  const PosedMesh m = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi()), {});
  EXPECT_EQ(m.vertices.rows(), a.vertex_count());
  EXPECT_EQ(render_faces(a).rows(), a.faces.rows());
}

TEST(InnerMouth, AnchorOutOfRange) {
  auto a = small_assets();
  a.lip_anchor_vertex = a.vertex_count();
  const Vertices joints = regress_joints(a, a.template_vertices);
  EXPECT_THROW(inner_mouth_rest_vertices(a, a.template_vertices, joints), PreconditionError);
}

TEST(InnerMouth, FacesIndexTheAppendedBlock) {
  const Faces f = inner_mouth_faces(40, 162);
  EXPECT_GE(f.minCoeff(), 162);
  EXPECT_LT(f.maxCoeff(), 202);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    EXPECT_NE(f(i, 0), f(i, 1));
    EXPECT_NE(f(i, 1), f(i, 2));
    EXPECT_NE(f(i, 0), f(i, 2));
  }
}
