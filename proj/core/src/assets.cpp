#include "drivemap/assets.hpp"

#include "drivemap/errors.hpp"
#include "drivemap/face_model.hpp"
#include "drivemap/rotation.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>

namespace drivemap {

namespace {

constexpr double kEllipsoidRadii[3] = {0.85, 1.1, 0.95};
constexpr double kRegressorBandwidth = 0.25;
constexpr double kSkinningBandwidth = 0.4;
constexpr int kSigmaSamples = 64;

struct Icosphere {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

Icosphere make_icosphere(int level) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere m;
  m.vertices = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) {
    v.normalize();
  }
  m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) {
        return it->second;
      }
      const int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  return m;
}

Eigen::MatrixXd orthonormal_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      g(i, j) = normal(rng);
    }
  }
  if (cols == 0) {
    return g;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::VectorXd soft_weights(const Vertices& vertices, const Vec3& target, double bandwidth) {
  Eigen::VectorXd w(vertices.rows());
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const double d2 = (vertices.row(i).transpose() - target).squaredNorm();
    w[i] = std::exp(-d2 / (2.0 * bandwidth * bandwidth));
  }
  return w / w.sum();
}

std::vector<std::uint32_t> dims(std::initializer_list<Eigen::Index> d) {
  std::vector<std::uint32_t> out;
  for (auto v : d) {
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      out.data(), m.rows(), m.cols()) = m;
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      v.data(), rows, cols);
}

const TensorEntry& expect_entry(
    const TensorContainer& c,
    std::string_view name,
    DType dtype,
    std::size_t rank) {
  const auto& e = c.at(name);
  if (e.dtype() != dtype) {
    throw ParseError(
        std::string(name),
        "dtype mismatch: expected " + std::string(to_string(dtype)) + ", found " +
            std::string(to_string(e.dtype())));
  }
  if (e.shape.size() != rank) {
    throw ParseError(std::string(name), "expected rank " + std::to_string(rank));
  }
  return e;
}

double scalar_f64(const TensorContainer& c, std::string_view name) {
  const auto& e = c.at(name);
  const auto& v = e.values<double>();
  if (v.size() != 1) {
    throw ParseError(std::string(name), "expected a scalar");
  }
  return v[0];
}

int scalar_i32(const TensorContainer& c, std::string_view name) {
  const auto& v = c.at(name).values<std::int32_t>();
  if (v.size() != 1) {
    throw ParseError(std::string(name), "expected a scalar");
  }
  return v[0];
}

} // namespace

void FaceModelAssets::validate() const {
  const int nv = vertex_count();
  if (nv < 3) {
    throw PreconditionError("assets need at least 3 template vertices");
  }
  if (!template_vertices.allFinite()) {
    throw PreconditionError("template vertices must be finite");
  }
  if (faces.rows() == 0 || faces.minCoeff() < 0 || faces.maxCoeff() >= nv) {
    throw PreconditionError("faces must reference template vertices");
  }
  const Eigen::Index rows = 3 * static_cast<Eigen::Index>(nv);
  for (const auto* basis : {&shape_basis, &expr_basis, &pose_basis}) {
    if (basis->rows() != rows) {
      throw PreconditionError("blendshape basis rows must equal 3 * N_v");
    }
    if (!basis->allFinite()) {
      throw PreconditionError("blendshape bases must be finite");
    }
  }
  const int k = joint_count();
  if (k < 1 || joint_parents[0] != -1) {
    throw PreconditionError("joint 0 must be the root (parent -1)");
  }
  for (int j = 1; j < k; ++j) {
    if (joint_parents[j] < 0 || joint_parents[j] >= j) {
      throw PreconditionError(
          "joint " + std::to_string(j) + " parent must precede it (rooted tree in topological order)");
    }
  }
  if (n_pose_corrective() != 9 * (k - 1)) {
    throw PreconditionError("pose corrective basis must have 9 * (K - 1) columns");
  }
  if (blend_weights.rows() != nv || blend_weights.cols() != k) {
    throw PreconditionError("blend weights must be N_v x K");
  }
  if (joint_regressor.rows() != k || joint_regressor.cols() != nv) {
    throw PreconditionError("joint regressor must be K x N_v");
  }
  if (blend_weights.minCoeff() < 0.0) {
    throw PreconditionError("blend weights must be non-negative");
  }
  for (Eigen::Index v = 0; v < nv; ++v) {
    if (std::abs(blend_weights.row(v).sum() - 1.0) > 1e-6) {
      throw PreconditionError("blend weight row " + std::to_string(v) + " does not sum to 1");
    }
  }
  if (static_cast<int>(head_vertex_mask.size()) != nv) {
    throw PreconditionError("head vertex mask must have N_v entries");
  }
  if (inner_mouth_count < 0) {
    throw PreconditionError("inner mouth count must be non-negative");
  }
  if (inner_mouth_count > 0) {
    if (lip_anchor_vertex < 0 || lip_anchor_vertex >= nv) {
      throw PreconditionError("lip anchor vertex out of range");
    }
    if (joint_count() <= kJawJoint) {
      throw PreconditionError("inner mouth requires a jaw joint");
    }
    (void)inner_mouth_layout(inner_mouth_count);
  }
  if (!(deformation_sigma > 0.0) || !std::isfinite(deformation_sigma)) {
    throw PreconditionError("deformation sigma must be positive");
  }
}

TensorContainer assets_to_container(const FaceModelAssets& a) {
  a.validate();
  const Eigen::Index nv = a.vertex_count();
  TensorContainer c;
  c.add<double>("template_vertices", dims({nv, 3}), row_major(a.template_vertices));
  {
    std::vector<std::int32_t> f(static_cast<std::size_t>(a.faces.size()));
    Eigen::Map<Faces>(f.data(), a.faces.rows(), 3) = a.faces;
    c.add<std::int32_t>("faces", dims({a.faces.rows(), 3}), std::move(f));
  }
  c.add<double>("shape_basis", dims({nv, 3, a.n_beta()}), row_major(a.shape_basis));
  c.add<double>("expr_basis", dims({nv, 3, a.n_psi()}), row_major(a.expr_basis));
  c.add<double>("pose_corrective_basis", dims({nv, 3, a.n_pose_corrective()}), row_major(a.pose_basis));
  c.add<double>("blend_weights", dims({nv, a.joint_count()}), row_major(a.blend_weights));
  c.add<double>("joint_regressor", dims({a.joint_count(), nv}), row_major(a.joint_regressor));
  c.add<std::int32_t>(
      "joint_parents",
      dims({a.joint_count()}),
      std::vector<std::int32_t>(a.joint_parents.begin(), a.joint_parents.end()));
  c.add<std::int32_t>(
      "head_vertex_mask",
      dims({nv}),
      std::vector<std::int32_t>(a.head_vertex_mask.begin(), a.head_vertex_mask.end()));
  c.add<std::int32_t>("inner_mouth_count", dims({1}), {a.inner_mouth_count});
  c.add<std::int32_t>("lip_anchor_vertex", dims({1}), {a.lip_anchor_vertex});
  c.add<double>("deformation_sigma", dims({1}), {a.deformation_sigma});
  return c;
}

FaceModelAssets assets_from_container(const TensorContainer& c) {
  FaceModelAssets a;
  const auto& tv = expect_entry(c, "template_vertices", DType::Float64, 2);
  if (tv.shape[1] != 3) {
    throw ParseError("template_vertices", "expected shape (N_v, 3)");
  }
  const Eigen::Index nv = tv.shape[0];
  a.template_vertices = from_row_major(tv.values<double>(), nv, 3);

  const auto& f = expect_entry(c, "faces", DType::Int32, 2);
  if (f.shape[1] != 3) {
    throw ParseError("faces", "expected shape (N_f, 3)");
  }
  a.faces = Eigen::Map<const Faces>(f.values<std::int32_t>().data(), f.shape[0], 3);

  auto basis = [&](std::string_view name) {
    const auto& e = expect_entry(c, name, DType::Float64, 3);
    if (e.shape[0] != nv || e.shape[1] != 3) {
      throw ParseError(std::string(name), "expected shape (N_v, 3, n)");
    }
    return from_row_major(e.values<double>(), 3 * nv, e.shape[2]);
  };
  a.shape_basis = basis("shape_basis");
  a.expr_basis = basis("expr_basis");
  a.pose_basis = basis("pose_corrective_basis");

  const auto& parents = expect_entry(c, "joint_parents", DType::Int32, 1).values<std::int32_t>();
  a.joint_parents.assign(parents.begin(), parents.end());
  const Eigen::Index k = static_cast<Eigen::Index>(a.joint_parents.size());

  const auto& w = expect_entry(c, "blend_weights", DType::Float64, 2);
  if (w.shape[0] != nv || w.shape[1] != k) {
    throw ParseError("blend_weights", "expected shape (N_v, K)");
  }
  a.blend_weights = from_row_major(w.values<double>(), nv, k);
  const auto& jr = expect_entry(c, "joint_regressor", DType::Float64, 2);
  if (jr.shape[0] != k || jr.shape[1] != nv) {
    throw ParseError("joint_regressor", "expected shape (K, N_v)");
  }
  a.joint_regressor = from_row_major(jr.values<double>(), k, nv);

  const auto& mask = expect_entry(c, "head_vertex_mask", DType::Int32, 1).values<std::int32_t>();
  a.head_vertex_mask.clear();
  for (auto m : mask) {
    a.head_vertex_mask.push_back(m != 0 ? 1 : 0);
  }
  a.inner_mouth_count = scalar_i32(c, "inner_mouth_count");
  a.lip_anchor_vertex = scalar_i32(c, "lip_anchor_vertex");
  a.deformation_sigma = scalar_f64(c, "deformation_sigma");
  a.validate();
  return a;
}

void save_assets(const FaceModelAssets& assets, const std::filesystem::path& path) {
  save_container(assets_to_container(assets), path);
}

FaceModelAssets load_assets(const std::filesystem::path& path) {
  return assets_from_container(load_container(path));
}

int icosphere_vertex_count(int level) {
  int n = 10;
  for (int i = 0; i < level; ++i) {
    n *= 4;
  }
  return n + 2;
}

FaceModelAssets generate_synthetic_assets(const SyntheticAssetConfig& cfg) {
  int level = -1;
  for (int l = 0; l <= 6; ++l) {
    if (icosphere_vertex_count(l) == cfg.n_vertices) {
      level = l;
    }
  }
  if (level < 0) {
    throw PreconditionError(
        "n_vertices must be an icosphere count (12, 42, 162, 642, 2562, 10242, 40962), got " +
        std::to_string(cfg.n_vertices));
  }
  if (cfg.n_joints < 2) {
    throw PreconditionError("n_joints must be at least 2 (root + one child)");
  }
  const Eigen::Index rows = 3 * static_cast<Eigen::Index>(cfg.n_vertices);
  const int n_pose = 9 * (cfg.n_joints - 1);
  if (cfg.n_beta < 1 || cfg.n_psi < 1 || cfg.n_beta > rows || cfg.n_psi > rows || n_pose > rows) {
    throw PreconditionError("basis sizes must lie in [1, 3 * n_vertices]");
  }
  if (cfg.inner_mouth_count < 0) {
    throw PreconditionError("inner_mouth_count must be non-negative");
  }
  if (cfg.inner_mouth_count > 0 && cfg.n_joints <= kJawJoint) {
    throw PreconditionError("inner mouth requires n_joints >= 3 (jaw joint)");
  }

  FaceModelAssets a;
  const Icosphere sphere = make_icosphere(level);
  a.template_vertices.resize(cfg.n_vertices, 3);
  for (int i = 0; i < cfg.n_vertices; ++i) {
    for (int k = 0; k < 3; ++k) {
      a.template_vertices(i, k) = sphere.vertices[i][k] * kEllipsoidRadii[k];
    }
  }
  a.faces.resize(static_cast<Eigen::Index>(sphere.faces.size()), 3);
  for (std::size_t f = 0; f < sphere.faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      a.faces(static_cast<Eigen::Index>(f), k) = sphere.faces[f][k];
    }
  }

  std::mt19937_64 rng(cfg.seed);
  a.shape_basis = orthonormal_gaussian(rows, cfg.n_beta, rng);
  a.expr_basis = orthonormal_gaussian(rows, cfg.n_psi, rng);
  a.pose_basis = orthonormal_gaussian(rows, n_pose, rng);

  std::vector<Vec3> targets = {
      {0.0, -0.9, -0.1}, {0.0, -0.55, -0.05}, {0.0, -0.35, 0.35}, {-0.3, 0.25, 0.6}, {0.3, 0.25, 0.6}};
  std::vector<int> parents = {-1, kRootJoint, kNeckJoint, kNeckJoint, kNeckJoint};
  targets.resize(static_cast<std::size_t>(std::min(cfg.n_joints, 5)));
  parents.resize(targets.size());
  std::uniform_real_distribution<double> unit(-0.6, 0.6);
  while (static_cast<int>(targets.size()) < cfg.n_joints) {
    targets.emplace_back(unit(rng), unit(rng), unit(rng));
    parents.push_back(kRootJoint);
  }
  a.joint_parents = parents;

  a.joint_regressor.resize(cfg.n_joints, cfg.n_vertices);
  for (int j = 0; j < cfg.n_joints; ++j) {
    a.joint_regressor.row(j) =
        soft_weights(a.template_vertices, targets[static_cast<std::size_t>(j)], kRegressorBandwidth)
            .transpose();
  }
  const Vertices rest_joints = a.joint_regressor * a.template_vertices;

  a.blend_weights.resize(cfg.n_vertices, cfg.n_joints);
  for (int v = 0; v < cfg.n_vertices; ++v) {
    for (int j = 0; j < cfg.n_joints; ++j) {
      const double d2 = (a.template_vertices.row(v) - rest_joints.row(j)).squaredNorm();
      a.blend_weights(v, j) = std::exp(-d2 / (2.0 * kSkinningBandwidth * kSkinningBandwidth));
    }
    a.blend_weights.row(v) /= a.blend_weights.row(v).sum();
  }

  a.head_vertex_mask.assign(static_cast<std::size_t>(cfg.n_vertices), 1);
  a.inner_mouth_count = cfg.inner_mouth_count;
  {
    const Vec3 lip_target(0.0, -0.5, 1.0);
    Eigen::Index best = 0;
    (a.template_vertices.rowwise() - lip_target.transpose()).rowwise().squaredNorm().minCoeff(&best);
    a.lip_anchor_vertex = static_cast<int>(best);
  }

  // Corpus sigma: standard deviation of expression deformation components over psi ~ N(0, I).
  {
    std::normal_distribution<double> normal(0.0, 1.0);
    double sum = 0.0;
    double sum_sq = 0.0;
    const double count = static_cast<double>(kSigmaSamples) * static_cast<double>(rows);
    Eigen::VectorXd psi(cfg.n_psi);
    for (int s = 0; s < kSigmaSamples; ++s) {
      for (int i = 0; i < cfg.n_psi; ++i) {
        psi[i] = normal(rng);
      }
      const Eigen::VectorXd d = a.expr_basis * psi;
      sum += d.sum();
      sum_sq += d.squaredNorm();
    }
    const double mean = sum / count;
    a.deformation_sigma = std::sqrt(std::max(sum_sq / count - mean * mean, 0.0));
  }
  a.validate();
  return a;
}

Camera default_synthetic_camera(int width, int height, double distance) {
  Camera c;
  c.width = width;
  c.height = height;
  c.fx = 1.5 * width;
  c.fy = 1.5 * width;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  // Model space is y-up with the face toward +z; OpenCV looks down +z with y down.
  c.rotation = Vec3(1.0, -1.0, -1.0).asDiagonal();
  c.translation = Vec3(0.0, 0.0, distance);
  return c;
}

ClipBundle generate_synthetic_clip(const FaceModelAssets& assets, const SyntheticClipConfig& cfg) {
  if (cfg.n_frames < 1) {
    throw PreconditionError("a clip needs at least one frame");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ClipBundle clip;
  clip.fps = cfg.fps;
  clip.shape.resize(assets.n_beta());
  for (int i = 0; i < assets.n_beta(); ++i) {
    clip.shape[i] = normal(rng);
  }
  clip.camera = default_synthetic_camera(cfg.width, cfg.height, 5.0 + 0.3 * (2.0 * uniform(rng) - 1.0));

  const int n_psi = assets.n_psi();
  const double amplitude = cfg.expression_scale * (0.2 + 0.8 * uniform(rng));
  Eigen::VectorXd offset(n_psi), amp(n_psi), freq(n_psi), phase(n_psi);
  for (int i = 0; i < n_psi; ++i) {
    offset[i] = 0.3 * normal(rng);
    amp[i] = normal(rng);
    freq[i] = 0.05 + 0.2 * uniform(rng);
    phase[i] = 2.0 * kPi * uniform(rng);
  }
  auto wave = [&](double max_deg) {
    const double a = radians(max_deg) * (2.0 * uniform(rng) - 1.0);
    const double w = 0.05 + 0.15 * uniform(rng);
    const double p = 2.0 * kPi * uniform(rng);
    return std::array<double, 3>{a, w, p};
  };
  std::array<std::array<double, 3>, 3> global_waves{wave(10.0), wave(10.0), wave(4.0)};
  std::array<std::array<double, 3>, 3> neck_waves{wave(3.0), wave(3.0), wave(2.0)};
  const auto jaw_wave = wave(8.0);
  const auto eye_wave = wave(5.0);
  const Vec3 base_translation(0.05 * normal(rng), 0.05 * normal(rng), 0.0);

  const int k = assets.joint_count();
  for (int t = 0; t < cfg.n_frames; ++t) {
    FrameParams f;
    f.expression.resize(n_psi);
    for (int i = 0; i < n_psi; ++i) {
      f.expression[i] = amplitude * (offset[i] + amp[i] * std::sin(freq[i] * t + phase[i]));
    }
    auto eval = [t](const std::array<double, 3>& w) { return w[0] * std::sin(w[1] * t + w[2]); };
    f.pose.global_rotation = Vec3(eval(global_waves[0]), eval(global_waves[1]), eval(global_waves[2]));
    f.pose.translation = base_translation;
    if (k > kNeckJoint) {
      f.pose.neck_rotation = Vec3(eval(neck_waves[0]), eval(neck_waves[1]), eval(neck_waves[2]));
    }
    if (k > kJawJoint) {
      f.pose.jaw_rotation = Vec3(0.5 * std::abs(jaw_wave[0]) * (1.0 + std::sin(jaw_wave[1] * t + jaw_wave[2])), 0.0, 0.0);
    }
    const Vec3 gaze(0.0, eval(eye_wave), 0.0);
    if (k > kEyeLeftJoint) {
      f.pose.eye_rotations[0] = gaze;
    }
    if (k > kEyeRightJoint) {
      f.pose.eye_rotations[1] = gaze;
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

} // namespace drivemap
