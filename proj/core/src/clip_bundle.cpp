#include "drivemap/clip_bundle.hpp"

#include "drivemap/errors.hpp"
#include "drivemap/rotation.hpp"
#include "drivemap/tensor_container.hpp"

#include <json.hpp>

#include <cmath>
#include <string>

namespace drivemap {

namespace {

using nlohmann::json;

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) {
    throw SchemaError(path, "expected an object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(path + "/" + key, "missing field");
  }
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw SchemaError(path, "expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw SchemaError(path, "value must be finite");
  }
  return v;
}

Eigen::VectorXd vector(const json& j, const std::string& path, std::optional<int> expected = {}) {
  if (!j.is_array()) {
    throw SchemaError(path, "expected an array of numbers");
  }
  if (expected && static_cast<int>(j.size()) != *expected) {
    throw SchemaError(
        path,
        "length " + std::to_string(j.size()) + " does not match expected " + std::to_string(*expected));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = number(j[i], path + "/" + std::to_string(i));
  }
  return v;
}

Vec3 vec3(const json& j, const std::string& path) {
  return vector(j, path, 3);
}

Vec3 axis_angle(const json& j, const std::string& path) {
  const Vec3 v = vec3(j, path);
  if (!(v.norm() < 2.0 * kPi)) {
    throw SchemaError(path, "axis-angle magnitude must be below 2*pi");
  }
  return v;
}

Camera parse_camera(const json& j, const std::string& path) {
  Camera c;
  c.fx = number(field(j, path, "fx"), path + "/fx");
  c.fy = number(field(j, path, "fy"), path + "/fy");
  c.cx = number(field(j, path, "cx"), path + "/cx");
  c.cy = number(field(j, path, "cy"), path + "/cy");
  const auto& w = field(j, path, "width");
  const auto& h = field(j, path, "height");
  if (!w.is_number_integer() || !h.is_number_integer()) {
    throw SchemaError(path + "/width", "width and height must be integers");
  }
  c.width = w.get<int>();
  c.height = h.get<int>();
  const auto& r = field(j, path, "rotation");
  const std::string rpath = path + "/rotation";
  if (r.is_array() && r.size() == 3 && r[0].is_array()) {
    for (int row = 0; row < 3; ++row) {
      c.rotation.row(row) = vec3(r[static_cast<std::size_t>(row)], rpath + "/" + std::to_string(row)).transpose();
    }
  } else {
    c.rotation = Rotation::from_axis_angle(axis_angle(r, rpath)).matrix();
  }
  c.translation = vec3(field(j, path, "translation"), path + "/translation");
  try {
    c.validate();
  } catch (const PreconditionError& e) {
    throw SchemaError(path, e.what());
  }
  return c;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back(v[i]);
  }
  return a;
}

} // namespace

Eigen::VectorXd PoseParams::flatten() const {
  Eigen::VectorXd v(kFlatSize);
  v << global_rotation, neck_rotation, jaw_rotation, eye_rotations[0], eye_rotations[1], translation;
  return v;
}

ClipBundle parse_clip_bundle(std::string_view text, const BundleDims& dims) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  ClipBundle b;
  b.shape = vector(field(root, "", "shape"), "/shape", dims.n_beta);
  b.camera = parse_camera(field(root, "", "camera"), "/camera");
  b.fps = number(field(root, "", "fps"), "/fps");
  if (!(b.fps > 0.0)) {
    throw SchemaError("/fps", "must be positive");
  }
  const auto& frames = field(root, "", "frames");
  if (!frames.is_array() || frames.empty()) {
    throw SchemaError("/frames", "expected a non-empty array");
  }
  std::optional<int> n_psi = dims.n_psi;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string p = "/frames/" + std::to_string(t);
    const auto& fj = frames[t];
    FrameParams f;
    f.expression = vector(field(fj, p, "expression"), p + "/expression", n_psi);
    n_psi = static_cast<int>(f.expression.size());
    f.pose.global_rotation = axis_angle(field(fj, p, "global_rotation"), p + "/global_rotation");
    f.pose.translation = vec3(field(fj, p, "translation"), p + "/translation");
    f.pose.neck_rotation = axis_angle(field(fj, p, "neck_rotation"), p + "/neck_rotation");
    f.pose.jaw_rotation = axis_angle(field(fj, p, "jaw_rotation"), p + "/jaw_rotation");
    const auto& eyes = field(fj, p, "eye_rotations");
    if (!eyes.is_array() || eyes.size() != 2) {
      throw SchemaError(p + "/eye_rotations", "expected two axis-angle triples");
    }
    f.pose.eye_rotations[0] = axis_angle(eyes[0], p + "/eye_rotations/0");
    f.pose.eye_rotations[1] = axis_angle(eyes[1], p + "/eye_rotations/1");
    b.frames.push_back(std::move(f));
  }
  return b;
}

std::string serialize_clip_bundle(const ClipBundle& b) {
  validate_clip_bundle(b);
  json root;
  root["shape"] = to_json(b.shape);
  json cam;
  cam["fx"] = b.camera.fx;
  cam["fy"] = b.camera.fy;
  cam["cx"] = b.camera.cx;
  cam["cy"] = b.camera.cy;
  cam["width"] = b.camera.width;
  cam["height"] = b.camera.height;
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    rot.push_back(to_json(b.camera.rotation.row(r).transpose()));
  }
  cam["rotation"] = rot;
  cam["translation"] = to_json(b.camera.translation);
  root["camera"] = cam;
  root["fps"] = b.fps;
  json frames = json::array();
  for (const auto& f : b.frames) {
    json fj;
    fj["expression"] = to_json(f.expression);
    fj["global_rotation"] = to_json(f.pose.global_rotation);
    fj["translation"] = to_json(f.pose.translation);
    fj["neck_rotation"] = to_json(f.pose.neck_rotation);
    fj["jaw_rotation"] = to_json(f.pose.jaw_rotation);
    fj["eye_rotations"] = json::array({to_json(f.pose.eye_rotations[0]), to_json(f.pose.eye_rotations[1])});
    frames.push_back(std::move(fj));
  }
  root["frames"] = std::move(frames);
  return root.dump(1);
}

void validate_clip_bundle(const ClipBundle& b, const BundleDims& dims) {
  if (b.frames.empty()) {
    throw SchemaError("/frames", "a clip needs at least one frame");
  }
  if (dims.n_beta && b.shape.size() != *dims.n_beta) {
    throw SchemaError("/shape", "length does not match expected " + std::to_string(*dims.n_beta));
  }
  if (!b.shape.allFinite()) {
    throw SchemaError("/shape", "value must be finite");
  }
  const auto n_psi = dims.n_psi.value_or(static_cast<int>(b.frames.front().expression.size()));
  for (std::size_t t = 0; t < b.frames.size(); ++t) {
    const std::string p = "/frames/" + std::to_string(t);
    const auto& f = b.frames[t];
    if (f.expression.size() != n_psi) {
      throw SchemaError(p + "/expression", "length does not match expected " + std::to_string(n_psi));
    }
    if (!f.expression.allFinite() || !f.pose.flatten().allFinite()) {
      throw SchemaError(p, "values must be finite");
    }
    for (const Vec3* r : {&f.pose.global_rotation, &f.pose.neck_rotation, &f.pose.jaw_rotation,
                          &f.pose.eye_rotations[0], &f.pose.eye_rotations[1]}) {
      if (!(r->norm() < 2.0 * kPi)) {
        throw SchemaError(p, "axis-angle magnitude must be below 2*pi");
      }
    }
  }
  if (!(b.fps > 0.0)) {
    throw SchemaError("/fps", "must be positive");
  }
  try {
    b.camera.validate();
  } catch (const PreconditionError& e) {
    throw SchemaError("/camera", e.what());
  }
}

ClipBundle load_clip_bundle(const std::filesystem::path& path, const BundleDims& dims) {
  const auto bytes = read_file_bytes(path);
  return parse_clip_bundle(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), dims);
}

void save_clip_bundle(const ClipBundle& bundle, const std::filesystem::path& path) {
  const std::string text = serialize_clip_bundle(bundle) + "\n";
  write_file_atomic(
      path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace drivemap
