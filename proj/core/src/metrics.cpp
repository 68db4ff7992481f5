#include "drivemap/metrics.hpp"

#include "drivemap/errors.hpp"
#include "drivemap/face_model.hpp"
#include "drivemap/threading.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace drivemap {

Rotation compose_head_rotation(const Vec3& global_rotation, const Vec3& neck_rotation) {
  return Rotation::from_axis_angle(global_rotation) * Rotation::from_axis_angle(neck_rotation);
}

PoseTrajectory head_trajectory(const ClipBundle& clip) {
  PoseTrajectory out;
  out.reserve(clip.frames.size());
  for (const auto& f : clip.frames) {
    out.push_back(compose_head_rotation(f.pose.global_rotation, f.pose.neck_rotation));
  }
  return out;
}

std::vector<Rotation> delta_rotations(const PoseTrajectory& trajectory) {
  if (trajectory.empty()) {
    throw PreconditionError("pose trajectory is empty");
  }
  std::vector<Rotation> out;
  out.reserve(trajectory.size());
  out.emplace_back();
  const Rotation inv0 = trajectory.front().inverse();
  for (std::size_t t = 1; t < trajectory.size(); ++t) {
    out.push_back(trajectory[t] * inv0);
  }
  return out;
}

double geodesic_degrees(const Rotation& a, const Rotation& b) {
  const Eigen::Quaterniond rel = a.quaternion().conjugate() * b.quaternion();
  const double angle = 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return std::clamp(degrees(angle), 0.0, 180.0);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) {
      s += v;
    }
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MetricReport MetricReport::from_values(std::string metric, std::string sample, std::vector<double> values) {
  MetricReport r;
  r.metric_name = std::move(metric);
  r.sample_id = std::move(sample);
  r.per_frame = std::move(values);
  if (!r.per_frame.empty()) {
    const double n = static_cast<double>(r.per_frame.size());
    r.mean = pairwise_sum(r.per_frame) / n;
    std::vector<double> sq(r.per_frame.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
      sq[i] = (r.per_frame[i] - r.mean) * (r.per_frame[i] - r.mean);
    }
    r.stddev = std::sqrt(pairwise_sum(sq) / n);
  }
  return r;
}

MetricReport hpf(const PoseTrajectory& pred, const PoseTrajectory& target, std::string sample_id) {
  if (pred.size() != target.size()) {
    throw DimensionError(
        "frame count mismatch: pred has " + std::to_string(pred.size()) + ", target has " +
        std::to_string(target.size()));
  }
  const auto dp = delta_rotations(pred);
  const auto dt = delta_rotations(target);
  std::vector<double> values(dp.size());
  values[0] = 0.0;
  for (std::size_t t = 1; t < dp.size(); ++t) {
    values[t] = geodesic_degrees(dp[t], dt[t]);
  }
  return MetricReport::from_values(kHpfName, std::move(sample_id), std::move(values));
}

FrameFit frame_fit(const ClipBundle& clip, std::size_t frame) {
  if (frame >= clip.frames.size()) {
    throw PreconditionError(
        "frame " + std::to_string(frame) + " out of range for a clip of " + std::to_string(clip.frames.size()));
  }
  return FrameFit{clip.shape, clip.frames[frame].expression, clip.frames[frame].pose, clip.camera};
}

ExpressionParams expression_params(const FrameFit& fit) {
  return ExpressionParams{fit.expression, fit.pose.jaw_rotation, fit.pose.eye_rotations};
}

namespace {

Vertices full_expression_offset(const FaceModelAssets& assets, const Eigen::VectorXd& psi) {
  Vertices out = Vertices::Zero(assets.total_vertex_count(), 3);
  out.topRows(assets.vertex_count()) = expression_offset(assets, psi);
  return out;
}

// Mean over covered pixels of the channel-averaged absolute value of `residual`.
double masked_l1(const RasterBuffer& raster, const Faces& faces, const Vertices& residual) {
  const AttributeImage img = interpolate_attribute(raster, faces, residual);
  std::vector<double> per_pixel;
  per_pixel.reserve(raster.covered_count());
  for (std::size_t i = 0; i < raster.face_index.size(); ++i) {
    if (raster.face_index[i] < 0) {
      continue;
    }
    const double* px = img.data.data() + i * 3;
    per_pixel.push_back((std::abs(px[0]) + std::abs(px[1]) + std::abs(px[2])) / 3.0);
  }
  return pairwise_sum(per_pixel) / static_cast<double>(per_pixel.size());
}

} // namespace

HefFrameResult hef_frame(
    const FaceModelAssets& assets,
    const FrameFit& target,
    const ExpressionParams& pred,
    const RasterOptions& options) {
  if (pred.expression.size() != target.expression.size()) {
    throw DimensionError(
        "expression length mismatch: pred has " + std::to_string(pred.expression.size()) + ", target has " +
        std::to_string(target.expression.size()));
  }
  const PosedMesh mesh = evaluate_mesh(assets, target.shape, target.expression, target.pose);
  const Faces faces = render_faces(assets);
  const RasterBuffer raster = rasterize(mesh.vertices, faces, target.camera, options);
  HefFrameResult out;
  out.mask_pixels = raster.covered_count();
  if (out.mask_pixels == 0) {
    throw EmptyMaskError("target face covers no pixel");
  }
  const double sigma = assets.deformation_sigma;
  const Vertices residual =
      (mesh.expr_deformation - full_expression_offset(assets, pred.expression)) / sigma;
  out.value = masked_l1(raster, faces, residual);

  const bool rigid_differs = pred.jaw_rotation != target.pose.jaw_rotation ||
                             pred.eye_rotations[0] != target.pose.eye_rotations[0] ||
                             pred.eye_rotations[1] != target.pose.eye_rotations[1];
  if (rigid_differs) {
    PoseParams swapped = target.pose;
    swapped.jaw_rotation = pred.jaw_rotation;
    swapped.eye_rotations = pred.eye_rotations;
    const Eigen::VectorXd neutral = Eigen::VectorXd::Zero(target.expression.size());
    const Vertices rigid = (evaluate_mesh(assets, target.shape, neutral, target.pose).vertices -
                            evaluate_mesh(assets, target.shape, neutral, swapped).vertices) /
                           sigma;
    out.rigid_substituted_value = masked_l1(raster, faces, residual + rigid);
  }
  return out;
}

MetricReport hef(
    const FaceModelAssets& assets,
    const ClipBundle& target,
    const ClipBundle& pred,
    std::string sample_id,
    const RasterOptions& options) {
  if (target.frames.size() != pred.frames.size()) {
    throw DimensionError(
        "frame count mismatch: pred has " + std::to_string(pred.frames.size()) + ", target has " +
        std::to_string(target.frames.size()));
  }
  std::vector<double> values(target.frames.size());
  for (std::size_t t = 0; t < values.size(); ++t) {
    values[t] = hef_frame(assets, frame_fit(target, t), expression_params(frame_fit(pred, t)), options).value;
  }
  return MetricReport::from_values(kHefName, std::move(sample_id), std::move(values));
}

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream * 0x100000001b3ull + counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t {
  kSelfStream = 1,
  kNearStream = 2,
  kNoSkillStream = 3,
};

std::size_t pick(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter, std::size_t n) {
  return static_cast<std::size_t>(counter_hash(seed, stream, counter) % n);
}

AnchorStats stats_of(const std::vector<double>& values) {
  AnchorStats s;
  s.available = true;
  s.n = values.size();
  const double n = static_cast<double>(values.size());
  s.mean = pairwise_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
      sq[i] = (values[i] - s.mean) * (values[i] - s.mean);
    }
    s.stddev = std::sqrt(pairwise_sum(sq) / (n - 1.0));
    s.standard_error = s.stddev / std::sqrt(n);
  }
  return s;
}

AnchorStats unavailable(std::string note) {
  AnchorStats s;
  s.note = std::move(note);
  return s;
}

struct FrameRef {
  std::size_t clip = 0;
  std::size_t frame = 0;
};

} // namespace

CalibrationReport hef_calibrate(
    const FaceModelAssets& assets,
    std::span<const ClipBundle> corpus,
    const CalibrationOptions& options) {
  if (corpus.empty()) {
    throw PreconditionError("calibration corpus is empty");
  }
  if (options.n_pairs < 1) {
    throw PreconditionError("n_pairs must be at least 1");
  }
  if (options.near_window < 1) {
    throw PreconditionError("near_window must be at least 1");
  }
  std::vector<FrameRef> frames;
  for (std::size_t c = 0; c < corpus.size(); ++c) {
    if (corpus[c].frames.empty()) {
      throw PreconditionError("clip " + std::to_string(c) + " has no frames");
    }
    for (std::size_t t = 0; t < corpus[c].frames.size(); ++t) {
      frames.push_back({c, t});
    }
  }

  CalibrationReport report;
  report.near_window = options.near_window;
  report.n_clips = corpus.size();
  report.n_frames = frames.size();

  const int threads = resolve_thread_count(options.threads);
  const RasterOptions serial{1};
  const auto n_pairs = static_cast<std::size_t>(options.n_pairs);
  auto score = [&](const FrameRef& tgt, const FrameRef& prd) {
    const FrameFit fit = frame_fit(corpus[tgt.clip], tgt.frame);
    return hef_frame(assets, fit, expression_params(frame_fit(corpus[prd.clip], prd.frame)), serial).value;
  };
  auto run_pairs = [&](const std::function<std::pair<FrameRef, FrameRef>(std::size_t)>& draw) {
    std::vector<double> values(n_pairs);
    parallel_for_chunks(n_pairs, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto [a, b] = draw(i);
        values[i] = score(a, b);
      }
    });
    return stats_of(values);
  };
  const std::uint64_t seed = options.seed;

  report.self_pair = run_pairs([&](std::size_t i) {
    const FrameRef f = frames[pick(seed, kSelfStream, i, frames.size())];
    return std::pair{f, f};
  });

  std::vector<std::size_t> multi_frame;
  for (std::size_t c = 0; c < corpus.size(); ++c) {
    if (corpus[c].frames.size() >= 2) {
      multi_frame.push_back(c);
    }
  }
  if (multi_frame.empty()) {
    report.near_frame = unavailable("no clip has two frames");
  } else {
    const auto window = static_cast<std::size_t>(options.near_window);
    report.near_frame = run_pairs([&](std::size_t i) {
      const std::size_t c = multi_frame[pick(seed, kNearStream, 3 * i, multi_frame.size())];
      const std::size_t n = corpus[c].frames.size();
      const std::size_t t = pick(seed, kNearStream, 3 * i + 1, n);
      const std::size_t lo = t >= window ? t - window : 0;
      const std::size_t hi = std::min(n - 1, t + window);
      // Candidates are [lo, hi] without t.
      std::size_t u = lo + pick(seed, kNearStream, 3 * i + 2, hi - lo);
      if (u >= t) {
        ++u;
      }
      return std::pair{FrameRef{c, t}, FrameRef{c, u}};
    });
  }

  if (corpus.size() < 2) {
    report.no_skill = unavailable("needs at least two clips");
  } else {
    report.no_skill = run_pairs([&](std::size_t i) {
      const std::size_t a = pick(seed, kNoSkillStream, 4 * i, corpus.size());
      std::size_t b = pick(seed, kNoSkillStream, 4 * i + 1, corpus.size() - 1);
      if (b >= a) {
        ++b;
      }
      const FrameRef fa{a, pick(seed, kNoSkillStream, 4 * i + 2, corpus[a].frames.size())};
      const FrameRef fb{b, pick(seed, kNoSkillStream, 4 * i + 3, corpus[b].frames.size())};
      return std::pair{fa, fb};
    });
  }

  auto norm_of = [&](const FrameRef& f) { return corpus[f.clip].frames[f.frame].expression.norm(); };
  FrameRef neutral = frames.front();
  for (const auto& f : frames) {
    if (norm_of(f) < norm_of(neutral)) {
      neutral = f;
    }
  }
  std::vector<std::pair<double, FrameRef>> clip_max;
  for (std::size_t c = 0; c < corpus.size(); ++c) {
    FrameRef best{c, 0};
    for (std::size_t t = 1; t < corpus[c].frames.size(); ++t) {
      if (norm_of({c, t}) > norm_of(best)) {
        best = {c, t};
      }
    }
    clip_max.emplace_back(norm_of(best), best);
  }
  std::stable_sort(clip_max.begin(), clip_max.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(clip_max.size()))) - 1;
  const FrameRef expressive = clip_max[rank].second;
  if (expressive.clip == neutral.clip && expressive.frame == neutral.frame) {
    report.ceiling = unavailable("most neutral and most expressive frames coincide");
  } else {
    report.ceiling = stats_of({score(neutral, expressive)});
  }
  return report;
}

} // namespace drivemap
