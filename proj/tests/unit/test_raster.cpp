#include "drivemap/camera.hpp"
#include "drivemap/errors.hpp"
#include "drivemap/face_model.hpp"
#include "drivemap/raster.hpp"

#include "harness.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace drivemap;
using drivemap::testing::Gen;

namespace {

Camera pixel_camera(int w, int h) {
  // Identity extrinsic, unit focal: a point (u, v, 1) lands on pixel coordinate (u, v).
  Camera c;
  c.fx = c.fy = 1.0;
  c.cx = c.cy = 0.0;
  c.width = w;
  c.height = h;
  return c;
}

// Triangle given in pixel coordinates at depth z (pre-multiplied so it projects back).
void add_triangle(Vertices& v, Faces& f, std::initializer_list<Eigen::Vector2d> pts, double z) {
  const auto base = v.rows();
  v.conservativeResize(base + 3, 3);
  int i = 0;
  for (const auto& p : pts) {
    v.row(base + i) = Eigen::RowVector3d(p.x() * z, p.y() * z, z);
    ++i;
  }
  f.conservativeResize(f.rows() + 1, 3);
  f.row(f.rows() - 1) << static_cast<int>(base), static_cast<int>(base + 1), static_cast<int>(base + 2);
}

void expect_bit_equal(const RasterBuffer& a, const RasterBuffer& b) {
  ASSERT_EQ(a.face_index, b.face_index);
  ASSERT_EQ(a.barycentric.size(), b.barycentric.size());
  EXPECT_EQ(std::memcmp(a.barycentric.data(), b.barycentric.data(), a.barycentric.size() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(a.depth.data(), b.depth.data(), a.depth.size() * sizeof(double)), 0);
}

} // namespace

// ---- projection ----

TEST(Project, OpticalAxisLandsOnPrincipalPoint) {
  Camera c = pixel_camera(64, 48);
  c.fx = 50;
  c.fy = 60;
  c.cx = 31.5;
  c.cy = 20.25;
  Vertices p(1, 3);
  p << 0, 0, 3;
  const auto pr = project(c, p);
  EXPECT_EQ(pr.pixels(0, 0), 31.5);
  EXPECT_EQ(pr.pixels(0, 1), 20.25);
  EXPECT_EQ(pr.depth[0], 3.0);
  EXPECT_EQ(pr.behind_camera[0], 0);
}

TEST(Project, DoublingFocalDoublesOffset) {
  Gen g(1);
  Camera c = default_synthetic_camera(64, 64);
  Vertices p(10, 3);
  for (int i = 0; i < 10; ++i) {
    p.row(i) = g.vec3(0.5).transpose();
  }
  Camera c2 = c;
  c2.fx *= 2;
  const auto a = project(c, p);
  const auto b = project(c2, p);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(b.pixels(i, 0) - c.cx, 2.0 * (a.pixels(i, 0) - c.cx), 1e-12);
    EXPECT_EQ(b.pixels(i, 1), a.pixels(i, 1));
  }
}

TEST(Project, NearPlaneFlag) {
  const Camera c = pixel_camera(8, 8);
  Vertices p(3, 3);
  p << 0, 0, 1e-6, 0, 0, -1, 0, 0, 2e-6;
  const auto pr = project(c, p);
  EXPECT_EQ(pr.behind_camera[0], 1);
  EXPECT_EQ(pr.behind_camera[1], 1);
  EXPECT_EQ(pr.behind_camera[2], 0);
}

TEST(Project, ExtrinsicsApplyBeforeIntrinsics) {
  Camera c = default_synthetic_camera(100, 100, 4.0);
  Vertices p(1, 3);
  p << 0.2, 0.1, 0.0;
  const auto pr = project(c, p);
  // rotation diag(1, -1, -1), t = (0, 0, 4): camera-space (0.2, -0.1, 4).
  EXPECT_NEAR(pr.depth[0], 4.0, 1e-15);
  EXPECT_NEAR(pr.pixels(0, 0), c.fx * 0.05 + c.cx, 1e-12);
  EXPECT_NEAR(pr.pixels(0, 1), -c.fy * 0.025 + c.cy, 1e-12);
}

TEST(Camera, ValidationAndResolution) {
  Camera c = default_synthetic_camera(512, 512);
  EXPECT_NO_THROW(c.validate());
  const Camera half = c.with_resolution(128, 128);
  EXPECT_EQ(half.width, 128);
  EXPECT_DOUBLE_EQ(half.fx, c.fx / 4);
  EXPECT_DOUBLE_EQ(half.cx, c.cx / 4);
  c.fx = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
  c = default_synthetic_camera(8, 8);
  c.width = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
}

// ---- rasterisation ----

TEST(Rasterize, SingleTriangleCoversPixel) {
  Vertices v(0, 3);
  Faces f(0, 3);
  add_triangle(v, f, {{5, 5}, {20, 6}, {8, 18}}, 2.0);
  const auto r = rasterize(v, f, pixel_camera(32, 32));
  ASSERT_TRUE(r.covered(10, 10));
  EXPECT_EQ(r.face_index[r.pixel(10, 10)], 0);
  const double* b = &r.barycentric[r.pixel(10, 10) * 3];
  EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-12);
  EXPECT_NEAR(r.depth[r.pixel(10, 10)], 2.0, 1e-12);
  EXPECT_FALSE(r.covered(0, 0));
  EXPECT_EQ(r.depth[r.pixel(0, 0)], 0.0);
}

TEST(Rasterize, DegenerateTriangleCoversNothing) {
  Vertices v(0, 3);
  Faces f(0, 3);
  add_triangle(v, f, {{1, 1}, {10, 10}, {20, 20}}, 1.0);
  add_triangle(v, f, {{4, 4}, {4, 4}, {4, 4}}, 1.0);
  EXPECT_EQ(rasterize(v, f, pixel_camera(32, 32)).covered_count(), 0u);
}

TEST(Rasterize, TwoPlaneDepthTest) {
  Vertices v(0, 3);
  Faces f(0, 3);
  // Far plane first so face order alone cannot explain the result.
  add_triangle(v, f, {{0, 0}, {40, 0}, {0, 40}}, 2.0);
  add_triangle(v, f, {{2, 2}, {30, 4}, {6, 30}}, 1.0);
  const auto r = rasterize(v, f, pixel_camera(40, 40));
  const auto near_only = rasterize(v, Faces(f.bottomRows(1)), pixel_camera(40, 40));
  std::size_t both = 0;
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) {
      if (near_only.covered(x, y)) {
        ++both;
        EXPECT_EQ(r.face_index[r.pixel(x, y)], 1);
        EXPECT_NEAR(r.depth[r.pixel(x, y)], 1.0, 1e-12);
      }
    }
  }
  EXPECT_GT(both, 100u);
}

TEST(Rasterize, DepthTiesGoToLowerFaceIndex) {
  Vertices v(0, 3);
  Faces f(0, 3);
  add_triangle(v, f, {{0, 0}, {16, 0}, {0, 16}}, 1.0);
  add_triangle(v, f, {{0, 0}, {16, 0}, {0, 16}}, 1.0);
  const auto r = rasterize(v, f, pixel_camera(16, 16));
  for (auto idx : r.face_index) {
    EXPECT_NE(idx, 1);
  }
}

TEST(Rasterize, SharedEdgeCoveredExactlyOnce) {
  // A square split along its diagonal, with pixel centres lying on the diagonal.
  Vertices v(4, 3);
  v << 0, 0, 1, 8, 0, 1, 8, 8, 1, 0, 8, 1;
  Faces f(2, 3);
  f << 0, 1, 2, 0, 2, 3;
  const auto r = rasterize(v, f, pixel_camera(8, 8));
  EXPECT_EQ(r.covered_count(), 64u);
  // Also with the opposite winding.
  Faces g(2, 3);
  g << 0, 2, 1, 0, 3, 2;
  EXPECT_EQ(rasterize(v, g, pixel_camera(8, 8)).covered_count(), 64u);
}

TEST(Rasterize, BehindCameraTrianglesDropped) {
  Vertices v(3, 3);
  v << 0, 0, 1, 10, 0, 1, 0, 10, -1;
  Faces f(1, 3);
  f << 0, 1, 2;
  EXPECT_EQ(rasterize(v, f, pixel_camera(16, 16)).covered_count(), 0u);
}

TEST(Rasterize, PartitionOfUnityOnHead) {
  const auto& a = drivemap::testing::small_assets();
  Gen g(3);
  for (int i = 0; i < 5; ++i) {
    const auto m = evaluate_mesh(a, g.vector(a.n_beta()), g.vector(a.n_psi()), g.pose(0.3));
    const auto r = rasterize(m.vertices, render_faces(a), drivemap::testing::square_camera(64));
    ASSERT_GT(r.covered_count(), 100u);
    for (std::size_t p = 0; p < r.face_index.size(); ++p) {
      const double* b = &r.barycentric[p * 3];
      if (r.face_index[p] >= 0) {
        EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-6);
        for (int k = 0; k < 3; ++k) {
          EXPECT_GE(b[k], -1e-12);
          EXPECT_LE(b[k], 1.0 + 1e-12);
        }
      } else {
        EXPECT_EQ(b[0], 0.0);
        EXPECT_EQ(b[1], 0.0);
        EXPECT_EQ(b[2], 0.0);
      }
    }
  }
}

TEST(Rasterize, WatertightIcosphereSilhouette) {
  const auto& a = drivemap::testing::small_assets();
  const auto r = rasterize(a.template_vertices, a.faces, drivemap::testing::square_camera(96));
  // Every row's covered span is contiguous: no background pixel inside the silhouette.
  for (int y = 0; y < r.height; ++y) {
    int first = -1;
    int last = -1;
    for (int x = 0; x < r.width; ++x) {
      if (r.covered(x, y)) {
        first = first < 0 ? x : first;
        last = x;
      }
    }
    for (int x = first; first >= 0 && x <= last; ++x) {
      EXPECT_TRUE(r.covered(x, y)) << x << "," << y;
    }
  }
}

TEST(Rasterize, DeterministicAcrossThreadCounts) {
  const auto& a = drivemap::testing::small_assets();
  Gen g(4);
  const auto m = evaluate_mesh(a, g.vector(a.n_beta()), g.vector(a.n_psi()), g.pose(0.3));
  const Faces faces = render_faces(a);
  const Camera cam = drivemap::testing::square_camera(73);
  const auto ref = rasterize(m.vertices, faces, cam, {1});
  for (int threads : {2, 3, 7, 16}) {
    expect_bit_equal(ref, rasterize(m.vertices, faces, cam, {threads}));
  }
}

TEST(Rasterize, PointQueriesAgreeWithPixelGrid) {
  const auto& a = drivemap::testing::small_assets();
  const auto m = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi()), {});
  const Faces faces = render_faces(a);
  const Camera cam = drivemap::testing::square_camera(48);
  const auto r = rasterize(m.vertices, faces, cam);
  std::vector<Eigen::Vector2d> centres;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      centres.emplace_back(x + 0.5, y + 0.5);
    }
  }
  const auto s = rasterize_points(m.vertices, faces, cam, centres);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      const auto& q = s[static_cast<std::size_t>(y * 48 + x)];
      ASSERT_EQ(q.face, r.face_index[r.pixel(x, y)]);
      if (q.face >= 0) {
        EXPECT_NEAR(q.depth, r.depth[r.pixel(x, y)], 1e-12);
      }
    }
  }
}

// ---- interpolation ----

TEST(Interpolate, ConstantAttributeIsReproduced) {
  const auto& a = drivemap::testing::small_assets();
  const auto m = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi()), {});
  const Faces faces = render_faces(a);
  const auto r = rasterize(m.vertices, faces, drivemap::testing::square_camera(64));
  const Eigen::MatrixXd values = Eigen::MatrixXd::Constant(m.vertices.rows(), 2, 0.37);
  const auto img = interpolate_attribute(r, faces, values);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double expected = r.covered(x, y) ? 0.37 : 0.0;
      EXPECT_NEAR(img.at(y, x, 0), expected, 1e-6);
      EXPECT_NEAR(img.at(y, x, 1), expected, 1e-6);
    }
  }
}

TEST(Interpolate, ParityValuesStayConvex) {
  Vertices v(0, 3);
  Faces f(0, 3);
  add_triangle(v, f, {{1, 1}, {30, 3}, {4, 29}}, 1.5);
  Eigen::MatrixXd values(3, 1);
  values << 0, 1, 0;
  const auto r = rasterize(v, f, pixel_camera(32, 32));
  const auto img = interpolate_attribute(r, f, values);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      EXPECT_GE(img.at(y, x, 0), 0.0);
      EXPECT_LE(img.at(y, x, 0), 1.0);
    }
  }
}

TEST(Interpolate, CameraDepthAttributeMatchesDepthBuffer) {
  const auto& a = drivemap::testing::small_assets();
  Gen g(5);
  const auto m = evaluate_mesh(a, g.vector(a.n_beta()), g.vector(a.n_psi()), g.pose(0.4));
  const Faces faces = render_faces(a);
  const Camera cam = drivemap::testing::square_camera(64, 3.0);
  const auto r = rasterize(m.vertices, faces, cam);
  Eigen::MatrixXd z(m.vertices.rows(), 1);
  for (Eigen::Index i = 0; i < m.vertices.rows(); ++i) {
    z(i, 0) = (cam.rotation * m.vertices.row(i).transpose() + cam.translation).z();
  }
  const auto img = interpolate_attribute(r, faces, z);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (r.covered(x, y)) {
        EXPECT_NEAR(img.at(y, x, 0), r.depth[r.pixel(x, y)], 1e-4);
      }
    }
  }
}

TEST(Interpolate, LinearInValues) {
  const auto& a = drivemap::testing::small_assets();
  Gen g(6);
  const auto m = evaluate_mesh(a, Eigen::VectorXd::Zero(a.n_beta()), Eigen::VectorXd::Zero(a.n_psi()), {});
  const Faces faces = render_faces(a);
  const auto r = rasterize(m.vertices, faces, drivemap::testing::square_camera(32));
  Eigen::MatrixXd u(m.vertices.rows(), 3);
  Eigen::MatrixXd w(m.vertices.rows(), 3);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    u.row(i) = g.vec3().transpose();
    w.row(i) = g.vec3().transpose();
  }
  const auto iu = interpolate_attribute(r, faces, u);
  const auto iw = interpolate_attribute(r, faces, w);
  const auto is = interpolate_attribute(r, faces, 2.0 * u - 3.0 * w);
  for (std::size_t i = 0; i < is.data.size(); ++i) {
    EXPECT_NEAR(is.data[i], 2.0 * iu.data[i] - 3.0 * iw.data[i], 1e-12);
  }
}

TEST(Interpolate, TooFewRowsIsDimensionError) {
  Vertices v(0, 3);
  Faces f(0, 3);
  add_triangle(v, f, {{1, 1}, {10, 1}, {1, 10}}, 1.0);
  const auto r = rasterize(v, f, pixel_camera(12, 12));
  EXPECT_THROW(interpolate_attribute(r, f, Eigen::MatrixXd::Zero(2, 1)), DimensionError);
}
