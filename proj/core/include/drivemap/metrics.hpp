#pragma once

// Head Pose Follow (HPF) and Expression Follow (HEF).
//
// HPF: per frame, the SO(3) geodesic in degrees between frame-0-anchored head rotations
//   dR[t] = R_head[t] * R_head[0]^T,  R_head = R(global) * R(neck).
// HEF: per frame, the mask-aware L1 between the target's expression deformation and the
//   prediction's, both rasterised on the target's posed mesh, in units of sigma.

#include "drivemap/assets.hpp"
#include "drivemap/clip_bundle.hpp"
#include "drivemap/raster.hpp"
#include "drivemap/rotation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace drivemap {

Rotation compose_head_rotation(const Vec3& global_rotation, const Vec3& neck_rotation);

using PoseTrajectory = std::vector<Rotation>;

PoseTrajectory head_trajectory(const ClipBundle& clip);

/// dR[t] = R[t] * R[0]^T, with dR[0] the exact identity. Throws PreconditionError when empty.
std::vector<Rotation> delta_rotations(const PoseTrajectory& trajectory);

/// Angle of a^T b in degrees, in [0, 180]; independent of quaternion sign.
double geodesic_degrees(const Rotation& a, const Rotation& b);

/// Sum in a fixed pairwise tree, so the result does not depend on how callers split work.
double pairwise_sum(std::span<const double> values);

struct MetricReport {
  std::string metric_name;
  std::string sample_id;
  std::vector<double> per_frame;
  double mean = 0.0;
  double stddev = 0.0; // population

  static MetricReport from_values(std::string metric, std::string sample, std::vector<double> values);
};

inline constexpr const char* kHpfName = "hpf";
inline constexpr const char* kHefName = "hef";

/// Throws DimensionError on a frame-count mismatch.
MetricReport hpf(const PoseTrajectory& pred, const PoseTrajectory& target, std::string sample_id = {});

/// Everything fitted for one frame.
struct FrameFit {
  Eigen::VectorXd shape;
  Eigen::VectorXd expression;
  PoseParams pose;
  Camera camera;
};

FrameFit frame_fit(const ClipBundle& clip, std::size_t frame);

/// The parameters HEF substitutes.
struct ExpressionParams {
  Eigen::VectorXd expression;
  Vec3 jaw_rotation = Vec3::Zero();
  std::array<Vec3, 2> eye_rotations{Vec3::Zero(), Vec3::Zero()};
};

ExpressionParams expression_params(const FrameFit& fit);

struct HefFrameResult {
  double value = 0.0;
  /// Set when jaw or eye rotations differ: the same residual with the rigid jaw/eye
  /// displacement (target context, zero expression) added to both deformation fields.
  std::optional<double> rigid_substituted_value;
  std::size_t mask_pixels = 0;
};

/// Throws EmptyMaskError when the target mesh covers no pixel, DimensionError on
/// coefficient-count mismatches.
HefFrameResult hef_frame(
    const FaceModelAssets& assets,
    const FrameFit& target,
    const ExpressionParams& pred,
    const RasterOptions& options = {});

/// Per-frame hef_frame of pred's expression in target's context. Throws DimensionError on a
/// frame-count mismatch.
MetricReport hef(
    const FaceModelAssets& assets,
    const ClipBundle& target,
    const ClipBundle& pred,
    std::string sample_id = {},
    const RasterOptions& options = {});

struct CalibrationOptions {
  int n_pairs = 50;
  std::uint64_t seed = 0;
  /// Maximum frame distance of near-frame pairs.
  int near_window = 2;
  int threads = 0;
};

struct AnchorStats {
  bool available = false;
  double mean = 0.0;
  double stddev = 0.0; // sample (n - 1)
  double standard_error = 0.0;
  std::size_t n = 0;
  std::string note;
};

struct CalibrationReport {
  AnchorStats self_pair;
  AnchorStats near_frame;
  AnchorStats no_skill;
  AnchorStats ceiling;
  int near_window = 0;
  std::size_t n_clips = 0;
  std::size_t n_frames = 0;
};

/// Four reference points at single-frame granularity:
///   self_pair   every sampled frame against itself
///   near_frame  two frames of one clip at most `near_window` apart
///   no_skill    one frame each from two distinct random clips
///   ceiling     the lowest-||psi|| frame of the corpus against the frame holding the
///               99th-percentile (nearest rank) per-clip maximum ||psi||
/// Anchors the corpus cannot support are reported unavailable with a note. Pair sampling is a
/// counter-based function of the seed, so the report does not depend on the thread count.
CalibrationReport hef_calibrate(
    const FaceModelAssets& assets,
    std::span<const ClipBundle> corpus,
    const CalibrationOptions& options = {});

/// splitmix64 finaliser over (seed, stream, counter).
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

} // namespace drivemap
