#include "drivemap/assets.hpp"
#include "drivemap/clip_bundle.hpp"
#include "drivemap/errors.hpp"

#include "harness.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>

using namespace drivemap;
using drivemap::testing::Gen;
using drivemap::testing::TempDir;

namespace {

SyntheticAssetConfig desk_config(std::uint64_t seed) {
  SyntheticAssetConfig c;
  c.seed = seed;
  c.n_vertices = 162;
  c.n_beta = 8;
  c.n_psi = 6;
  c.inner_mouth_count = 40;
  return c;
}

void expect_orthonormal(const Eigen::MatrixXd& basis) {
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-6);
}

} // namespace

TEST(SyntheticAssets, SameSeedIsBitIdentical) {
  const auto a = generate_synthetic_assets(desk_config(7));
  const auto b = generate_synthetic_assets(desk_config(7));
  EXPECT_TRUE(assets_to_container(a).bit_equal(assets_to_container(b)));
  const auto c = generate_synthetic_assets(desk_config(8));
  EXPECT_FALSE(assets_to_container(a).bit_equal(assets_to_container(c)));
}

TEST(SyntheticAssets, BasesAreColumnOrthonormal) {
  auto cfg = desk_config(3);
  cfg.n_beta = 4;
  const auto a = generate_synthetic_assets(cfg);
  EXPECT_EQ(a.shape_basis.cols(), 4);
  expect_orthonormal(a.shape_basis);
  expect_orthonormal(a.expr_basis);
  expect_orthonormal(a.pose_basis);
}

TEST(SyntheticAssets, SkinningWeightShapeAndNormalisation) {
  const auto a = generate_synthetic_assets(desk_config(1));
  ASSERT_EQ(a.blend_weights.rows(), 162);
  ASSERT_EQ(a.blend_weights.cols(), 5);
  for (Eigen::Index v = 0; v < a.blend_weights.rows(); ++v) {
    EXPECT_NEAR(a.blend_weights.row(v).sum(), 1.0, 1e-6);
    EXPECT_GE(a.blend_weights.row(v).minCoeff(), 0.0);
  }
  EXPECT_EQ(a.joint_regressor.rows(), 5);
  EXPECT_EQ(a.joint_regressor.cols(), 162);
}

TEST(SyntheticAssets, RigIsARootedTreeWithFaceSlots) {
  auto cfg = desk_config(2);
  cfg.n_joints = 7;
  const auto a = generate_synthetic_assets(cfg);
  ASSERT_EQ(a.joint_count(), 7);
  EXPECT_EQ(a.joint_parents[0], -1);
  for (int k = 1; k < a.joint_count(); ++k) {
    EXPECT_GE(a.joint_parents[static_cast<std::size_t>(k)], 0);
    EXPECT_LT(a.joint_parents[static_cast<std::size_t>(k)], k);
  }
  EXPECT_EQ(a.joint_parents[kNeckJoint], kRootJoint);
  EXPECT_EQ(a.n_pose_corrective(), 9 * 6);
  EXPECT_NO_THROW(a.validate());
}

TEST(SyntheticAssets, MeshIsClosedAndValid) {
  const auto& a = drivemap::testing::small_assets();
  EXPECT_EQ(a.vertex_count(), 162);
  EXPECT_EQ(a.faces.rows(), 320);
  EXPECT_GE(a.faces.minCoeff(), 0);
  EXPECT_LT(a.faces.maxCoeff(), 162);
  // Closed 2-manifold: every undirected edge is shared by exactly two faces.
  std::map<std::pair<int, int>, int> edges;
  for (Eigen::Index f = 0; f < a.faces.rows(); ++f) {
    for (int e = 0; e < 3; ++e) {
      int u = a.faces(f, e);
      int v = a.faces(f, (e + 1) % 3);
      edges[{std::min(u, v), std::max(u, v)}]++;
    }
  }
  for (const auto& [edge, n] : edges) {
    EXPECT_EQ(n, 2);
  }
  EXPECT_TRUE(a.template_vertices.allFinite());
  EXPECT_GT(a.deformation_sigma, 0.0);
}

TEST(SyntheticAssets, DegenerateSizesRejected) {
  auto cfg = desk_config(0);
  cfg.n_joints = 1;
  EXPECT_THROW(generate_synthetic_assets(cfg), PreconditionError);
  cfg = desk_config(0);
  cfg.n_vertices = 10;
  EXPECT_THROW(generate_synthetic_assets(cfg), PreconditionError);
  cfg = desk_config(0);
  cfg.n_vertices = 100;
  EXPECT_THROW(generate_synthetic_assets(cfg), PreconditionError);
  cfg = desk_config(0);
  cfg.n_psi = 0;
  EXPECT_THROW(generate_synthetic_assets(cfg), PreconditionError);
}

TEST(SyntheticAssets, IcosphereCounts) {
  EXPECT_EQ(icosphere_vertex_count(0), 12);
  EXPECT_EQ(icosphere_vertex_count(1), 42);
  EXPECT_EQ(icosphere_vertex_count(2), 162);
  EXPECT_EQ(icosphere_vertex_count(3), 642);
}

TEST(SyntheticAssets, SigmaMatchesItsDefinition) {
  const auto& a = drivemap::testing::small_assets();
  // Independent estimate of std of E psi components, psi ~ N(0, I): for orthonormal
  // columns, E||E psi||^2 = n_psi, so the per-component variance is n_psi / (3 N_v).
  const double expected = std::sqrt(static_cast<double>(a.n_psi()) / (3.0 * a.vertex_count()));
  EXPECT_NEAR(a.deformation_sigma, expected, 0.25 * expected);
}

TEST(AssetContainer, RoundTripThroughFile) {
  TempDir dir("assets");
  const auto& a = drivemap::testing::small_assets();
  save_assets(a, dir / "a.lka");
  const auto b = load_assets(dir / "a.lka");
  EXPECT_TRUE(assets_to_container(a).bit_equal(assets_to_container(b)));
  EXPECT_EQ(b.inner_mouth_count, a.inner_mouth_count);
  EXPECT_EQ(b.lip_anchor_vertex, a.lip_anchor_vertex);
  EXPECT_EQ(b.deformation_sigma, a.deformation_sigma);
  EXPECT_EQ(b.head_vertex_mask, a.head_vertex_mask);
}

TEST(AssetContainer, AllFieldsPresent) {
  const auto c = assets_to_container(drivemap::testing::small_assets());
  for (const char* name :
       {"template_vertices", "faces", "shape_basis", "expr_basis", "pose_corrective_basis", "blend_weights",
        "joint_regressor", "joint_parents", "head_vertex_mask", "inner_mouth_count", "lip_anchor_vertex",
        "deformation_sigma"}) {
    EXPECT_TRUE(c.contains(name)) << name;
  }
  EXPECT_EQ(c.at("shape_basis").shape, (std::vector<std::uint32_t>{162, 3, 8}));
}

TEST(AssetContainer, InvalidWeightsRejected) {
  auto a = drivemap::testing::small_assets();
  a.blend_weights(3, 0) += 0.01;
  EXPECT_THROW(a.validate(), PreconditionError);
  auto b = drivemap::testing::small_assets();
  b.joint_parents[2] = 3;
  EXPECT_THROW(b.validate(), PreconditionError);
  auto c = drivemap::testing::small_assets();
  c.faces(0, 0) = 10000;
  EXPECT_THROW(c.validate(), PreconditionError);
  auto d = drivemap::testing::small_assets();
  d.lip_anchor_vertex = -1;
  EXPECT_THROW(d.validate(), PreconditionError);
}

// ---- clip bundles ----

namespace {

const char* kMinimalBundle = R"({
  "shape": [0, 0],
  "fps": 25,
  "camera": {"fx": 100, "fy": 100, "cx": 32, "cy": 32, "width": 64, "height": 64,
             "rotation": [0, 0, 0], "translation": [0, 0, 5]},
  "frames": [{"expression": [0, 0, 0], "global_rotation": [0, 0, 0], "translation": [0, 0, 0],
              "neck_rotation": [0, 0, 0], "jaw_rotation": [0, 0, 0],
              "eye_rotations": [[0, 0, 0], [0, 0, 0]], "alpha_mattes": "ignored"}]
})";

std::string schema_path_of(std::string_view text, BundleDims dims = {}) {
  try {
    parse_clip_bundle(text, dims);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<no error>";
}

} // namespace

TEST(ClipBundle, MinimalAllZeroBundleLoads) {
  const auto b = parse_clip_bundle(kMinimalBundle, {2, 3});
  EXPECT_EQ(b.frames.size(), 1u);
  EXPECT_TRUE(b.shape.isZero());
  EXPECT_TRUE(b.frames[0].expression.isZero());
  EXPECT_TRUE(b.camera.rotation.isIdentity());
  EXPECT_EQ(b.camera.width, 64);
}

TEST(ClipBundle, SixteenFrameRoundTrip) {
  const auto& a = drivemap::testing::small_assets();
  SyntheticClipConfig cfg;
  cfg.seed = 5;
  const auto clip = generate_synthetic_clip(a, cfg);
  ASSERT_EQ(clip.frames.size(), 16u);
  TempDir dir("bundle");
  save_clip_bundle(clip, dir / "c.json");
  const auto back = load_clip_bundle(dir / "c.json", a.dims());
  ASSERT_EQ(back.frames.size(), 16u);
  // Shortest round-trip decimal output reproduces float64 exactly.
  EXPECT_EQ(back.shape, clip.shape);
  EXPECT_EQ(back.camera.rotation, clip.camera.rotation);
  EXPECT_EQ(back.camera.fx, clip.camera.fx);
  for (std::size_t t = 0; t < 16; ++t) {
    EXPECT_EQ(back.frames[t].expression, clip.frames[t].expression);
    EXPECT_EQ(back.frames[t].pose.flatten(), clip.frames[t].pose.flatten());
  }
}

TEST(ClipBundle, ExpressionLengthMismatchIsSchemaError) {
  EXPECT_EQ(schema_path_of(kMinimalBundle, {2, 4}), "/frames/0/expression");
  EXPECT_EQ(schema_path_of(kMinimalBundle, {3, 3}), "/shape");
}

TEST(ClipBundle, MissingAndMalformedFields) {
  std::string text = kMinimalBundle;
  auto without = [&](const std::string& key) {
    std::string t = text;
    const auto pos = t.find("\"" + key + "\"");
    t.replace(pos, key.size() + 2, "\"x_" + key + "\"");
    return t;
  };
  EXPECT_EQ(schema_path_of(without("fps")), "/fps");
  EXPECT_EQ(schema_path_of(without("jaw_rotation")), "/frames/0/jaw_rotation");
  EXPECT_EQ(schema_path_of(without("fx")), "/camera/fx");
  EXPECT_EQ(schema_path_of("{"), "");
  std::string big = text;
  big.replace(big.find("\"jaw_rotation\": [0, 0, 0]"), 25, "\"jaw_rotation\": [7, 0, 0]");
  EXPECT_EQ(schema_path_of(big), "/frames/0/jaw_rotation");
  std::string ragged = text;
  ragged.replace(ragged.find("[[0, 0, 0], [0, 0, 0]]"), 22, "[[0, 0, 0]]");
  EXPECT_EQ(schema_path_of(ragged), "/frames/0/eye_rotations");
}

TEST(ClipBundle, FramesMustShareExpressionLength) {
  const auto& a = drivemap::testing::small_assets();
  auto clip = generate_synthetic_clip(a, SyntheticClipConfig{});
  const auto text = serialize_clip_bundle(clip);
  clip.frames[3].expression.conservativeResize(a.n_psi() + 1);
  clip.frames[3].expression[a.n_psi()] = 0.0;
  EXPECT_THROW(validate_clip_bundle(clip), SchemaError);
  EXPECT_NO_THROW(parse_clip_bundle(text, a.dims()));
}

TEST(ClipBundle, CameraAcceptsMatrixOrAxisAngle) {
  std::string text = kMinimalBundle;
  text.replace(text.find("\"rotation\": [0, 0, 0]"), 21, "\"rotation\": [[1, 0, 0], [0, -1, 0], [0, 0, -1]]");
  const auto b = parse_clip_bundle(text);
  EXPECT_EQ(b.camera.rotation(1, 1), -1.0);
  std::string bad = kMinimalBundle;
  bad.replace(bad.find("\"rotation\": [0, 0, 0]"), 21, "\"rotation\": [[2, 0, 0], [0, 1, 0], [0, 0, 1]]");
  EXPECT_EQ(schema_path_of(bad), "/camera");
}

TEST(ClipBundle, Fnv1aKnownVectors) {
  const std::string empty;
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ull);
  const std::string a = "a";
  EXPECT_EQ(
      fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(a.data()), a.size())),
      0xaf63dc4c8601ec8cull);
}

TEST(ClipBundle, SyntheticClipsAreDeterministic) {
  const auto& a = drivemap::testing::small_assets();
  SyntheticClipConfig cfg;
  cfg.seed = 9;
  EXPECT_EQ(serialize_clip_bundle(generate_synthetic_clip(a, cfg)), serialize_clip_bundle(generate_synthetic_clip(a, cfg)));
  cfg.n_frames = 0;
  EXPECT_THROW(generate_synthetic_clip(a, cfg), PreconditionError);
}
