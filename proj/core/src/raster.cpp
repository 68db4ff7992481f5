#include "drivemap/raster.hpp"

#include "drivemap/errors.hpp"
#include "drivemap/threading.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace drivemap {

namespace {

struct Edge {
  double ax, ay, bx, by;
  bool include_on_zero;

  double eval(double px, double py) const {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  }
  bool inside(double w) const {
    return w > 0.0 || (w == 0.0 && include_on_zero);
  }
};

Edge make_edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  // Interior is on the positive side; the gradient (A, B) points into it.
  const double gx = -(b.y() - a.y());
  const double gy = b.x() - a.x();
  return Edge{a.x(), a.y(), b.x(), b.y(), gx > 0.0 || (gx == 0.0 && gy > 0.0)};
}

struct TriangleSetup {
  bool valid = false;
  std::int32_t face = -1;
  std::array<int, 3> order{0, 1, 2}; // slot -> original corner
  std::array<Edge, 3> edges{};       // edge opposite slot k
  std::array<double, 3> inv_z{};     // per slot
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;

  // Returns true and fills barycentrics (original corner order) and depth when `p` is covered.
  bool sample(double px, double py, Vec3& bary, double& depth) const {
    const double w0 = edges[0].eval(px, py);
    if (!edges[0].inside(w0)) {
      return false;
    }
    const double w1 = edges[1].eval(px, py);
    if (!edges[1].inside(w1)) {
      return false;
    }
    const double w2 = edges[2].eval(px, py);
    if (!edges[2].inside(w2)) {
      return false;
    }
    const double q0 = w0 * inv_z[0];
    const double q1 = w1 * inv_z[1];
    const double q2 = w2 * inv_z[2];
    const double s = q0 + q1 + q2;
    if (!(s > 0.0)) {
      return false;
    }
    bary[order[0]] = q0 / s;
    bary[order[1]] = q1 / s;
    bary[order[2]] = q2 / s;
    depth = (w0 + w1 + w2) / s;
    return true;
  }
};

std::vector<TriangleSetup> setup_triangles(
    const Vertices& vertices,
    const Faces& faces,
    const Camera& camera) {
  const Projection proj = project(camera, vertices);
  std::vector<TriangleSetup> tris(static_cast<std::size_t>(faces.rows()));
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    TriangleSetup& t = tris[static_cast<std::size_t>(f)];
    t.face = static_cast<std::int32_t>(f);
    std::array<Eigen::Vector2d, 3> p;
    std::array<double, 3> z{};
    bool behind = false;
    for (int k = 0; k < 3; ++k) {
      const auto v = faces(f, k);
      if (v < 0 || v >= vertices.rows()) {
        throw DimensionError("face " + std::to_string(f) + " references vertex " + std::to_string(v));
      }
      behind = behind || proj.behind_camera[static_cast<std::size_t>(v)] != 0;
      p[k] = proj.pixels.row(v).transpose();
      z[k] = proj.depth[v];
    }
    if (behind) {
      continue;
    }
    auto area = [&](const std::array<int, 3>& o) {
      return (p[o[1]].x() - p[o[0]].x()) * (p[o[2]].y() - p[o[0]].y()) -
          (p[o[1]].y() - p[o[0]].y()) * (p[o[2]].x() - p[o[0]].x());
    };
    double a = area(t.order);
    if (a == 0.0 || !std::isfinite(a)) {
      continue;
    }
    if (a < 0.0) {
      t.order = {0, 2, 1};
      a = -a;
    }
    const auto& o = t.order;
    t.edges[0] = make_edge(p[o[1]], p[o[2]]);
    t.edges[1] = make_edge(p[o[2]], p[o[0]]);
    t.edges[2] = make_edge(p[o[0]], p[o[1]]);
    for (int k = 0; k < 3; ++k) {
      t.inv_z[k] = 1.0 / z[o[k]];
    }
    const double minx = std::min({p[0].x(), p[1].x(), p[2].x()});
    const double maxx = std::max({p[0].x(), p[1].x(), p[2].x()});
    const double miny = std::min({p[0].y(), p[1].y(), p[2].y()});
    const double maxy = std::max({p[0].y(), p[1].y(), p[2].y()});
    // Pixel x has its centre at x + 0.5.
    auto clamp_to = [](double v, int hi) {
      return static_cast<int>(std::clamp(v, -1.0, static_cast<double>(hi)));
    };
    t.x0 = clamp_to(std::floor(minx - 0.5), camera.width);
    t.x1 = clamp_to(std::ceil(maxx - 0.5), camera.width);
    t.y0 = clamp_to(std::floor(miny - 0.5), camera.height);
    t.y1 = clamp_to(std::ceil(maxy - 0.5), camera.height);
    t.valid = true;
  }
  return tris;
}

} // namespace

std::size_t RasterBuffer::covered_count() const {
  return static_cast<std::size_t>(
      std::count_if(face_index.begin(), face_index.end(), [](std::int32_t f) { return f >= 0; }));
}

RasterBuffer rasterize(
    const Vertices& vertices,
    const Faces& faces,
    const Camera& camera,
    const RasterOptions& options) {
  camera.validate();
  const std::vector<TriangleSetup> tris = setup_triangles(vertices, faces, camera);

  RasterBuffer out;
  out.width = camera.width;
  out.height = camera.height;
  const auto npix = static_cast<std::size_t>(camera.width) * static_cast<std::size_t>(camera.height);
  out.face_index.assign(npix, -1);
  out.barycentric.assign(npix * 3, 0.0);
  out.depth.assign(npix, std::numeric_limits<double>::infinity());

  // Bands own disjoint rows and visit faces in ascending order, so the result does not
  // depend on how rows are partitioned.
  const int threads = resolve_thread_count(options.threads);
  parallel_for_chunks(
      static_cast<std::size_t>(camera.height), threads, [&](std::size_t row_begin, std::size_t row_end) {
        const int rb = static_cast<int>(row_begin);
        const int re = static_cast<int>(row_end) - 1;
        Vec3 bary;
        double depth = 0.0;
        for (const auto& t : tris) {
          if (!t.valid) {
            continue;
          }
          const int y0 = std::max(t.y0, rb);
          const int y1 = std::min(t.y1, re);
          const int x0 = std::max(t.x0, 0);
          const int x1 = std::min(t.x1, camera.width - 1);
          for (int y = y0; y <= y1; ++y) {
            const double py = y + 0.5;
            for (int x = x0; x <= x1; ++x) {
              const double px = x + 0.5;
              if (!t.sample(px, py, bary, depth)) {
                continue;
              }
              const std::size_t idx = out.pixel(x, y);
              if (depth < out.depth[idx]) {
                out.depth[idx] = depth;
                out.face_index[idx] = t.face;
                out.barycentric[idx * 3 + 0] = bary[0];
                out.barycentric[idx * 3 + 1] = bary[1];
                out.barycentric[idx * 3 + 2] = bary[2];
              }
            }
          }
        }
      });

  for (std::size_t i = 0; i < npix; ++i) {
    if (out.face_index[i] < 0) {
      out.depth[i] = 0.0;
    }
  }
  return out;
}

std::vector<PointSample> rasterize_points(
    const Vertices& vertices,
    const Faces& faces,
    const Camera& camera,
    std::span<const Eigen::Vector2d> screen_points) {
  camera.validate();
  const std::vector<TriangleSetup> tris = setup_triangles(vertices, faces, camera);
  std::vector<PointSample> out(screen_points.size());
  for (std::size_t i = 0; i < screen_points.size(); ++i) {
    const auto& q = screen_points[i];
    double best = std::numeric_limits<double>::infinity();
    Vec3 bary;
    double depth = 0.0;
    for (const auto& t : tris) {
      if (!t.valid || !t.sample(q.x(), q.y(), bary, depth)) {
        continue;
      }
      if (depth < best) {
        best = depth;
        out[i] = PointSample{t.face, bary, depth};
      }
    }
  }
  return out;
}

AttributeImage interpolate_attribute(
    const RasterBuffer& raster,
    const Faces& faces,
    const Eigen::MatrixXd& values) {
  if (faces.size() > 0 && faces.maxCoeff() >= values.rows()) {
    throw DimensionError(
        "attribute has " + std::to_string(values.rows()) + " rows but faces reference vertex " +
        std::to_string(faces.maxCoeff()));
  }
  AttributeImage img;
  img.width = raster.width;
  img.height = raster.height;
  img.channels = static_cast<int>(values.cols());
  const std::size_t c = static_cast<std::size_t>(img.channels);
  img.data.assign(static_cast<std::size_t>(raster.width) * raster.height * c, 0.0);
  for (std::size_t i = 0; i < raster.face_index.size(); ++i) {
    const auto f = raster.face_index[i];
    if (f < 0) {
      continue;
    }
    const double b0 = raster.barycentric[i * 3 + 0];
    const double b1 = raster.barycentric[i * 3 + 1];
    const double b2 = raster.barycentric[i * 3 + 2];
    const auto v0 = faces(f, 0);
    const auto v1 = faces(f, 1);
    const auto v2 = faces(f, 2);
    for (std::size_t k = 0; k < c; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      img.data[i * c + k] = b0 * values(v0, kk) + b1 * values(v1, kk) + b2 * values(v2, kk);
    }
  }
  return img;
}

} // namespace drivemap
