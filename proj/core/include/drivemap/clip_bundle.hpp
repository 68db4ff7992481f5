#pragma once

#include "drivemap/camera.hpp"
#include "drivemap/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drivemap {

/// Per-frame rigid and articulated pose. All rotations are axis-angle in radians.
struct PoseParams {
  Vec3 global_rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 neck_rotation = Vec3::Zero();
  Vec3 jaw_rotation = Vec3::Zero();
  std::array<Vec3, 2> eye_rotations{Vec3::Zero(), Vec3::Zero()};

  /// global, neck, jaw, eye_l, eye_r, translation (18 values).
  Eigen::VectorXd flatten() const;
  static constexpr int kFlatSize = 18;
};

struct FrameParams {
  Eigen::VectorXd expression;
  PoseParams pose;
};

/// One fitted clip: identity and camera are shared by every frame.
struct ClipBundle {
  Eigen::VectorXd shape;
  Camera camera;
  double fps = 25.0;
  std::vector<FrameParams> frames;

  int n_beta() const {
    return static_cast<int>(shape.size());
  }
  int n_psi() const {
    return frames.empty() ? 0 : static_cast<int>(frames.front().expression.size());
  }
};

/// Expected coefficient counts; unset members are not checked.
struct BundleDims {
  std::optional<int> n_beta;
  std::optional<int> n_psi;
};

/// Parses the clip-bundle JSON schema:
///   { "shape": [...], "fps": 25,
///     "camera": { "fx", "fy", "cx", "cy", "width", "height",
///                 "rotation": 3x3 nested rows or axis-angle triple, "translation": [3] },
///     "frames": [ { "expression": [...], "global_rotation": [3], "translation": [3],
///                   "neck_rotation": [3], "jaw_rotation": [3], "eye_rotations": [[3],[3]] } ] }
/// Unknown keys (e.g. "alpha_mattes") are ignored. Errors are SchemaError with a JSON pointer.
ClipBundle parse_clip_bundle(std::string_view json_text, const BundleDims& dims = {});
std::string serialize_clip_bundle(const ClipBundle& bundle);

ClipBundle load_clip_bundle(const std::filesystem::path& path, const BundleDims& dims = {});
void save_clip_bundle(const ClipBundle& bundle, const std::filesystem::path& path);

/// Checks the in-memory invariants (frame count, shared dims, finiteness, rotation magnitudes).
void validate_clip_bundle(const ClipBundle& bundle, const BundleDims& dims = {});

/// 64-bit FNV-1a, used for provenance records.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

} // namespace drivemap
