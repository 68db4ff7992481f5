#include "drivemap/driver_map.hpp"

#include "drivemap/errors.hpp"

#include <cmath>
#include <string>

namespace drivemap {

std::string_view to_string(MapMode mode) {
  switch (mode) {
    case MapMode::Full:
      return "full";
    case MapMode::NoDeformation:
      return "no_deformation";
    case MapMode::NoPosenc:
      return "no_posenc";
  }
  return "full";
}

MapMode parse_map_mode(std::string_view text) {
  if (text == "full") {
    return MapMode::Full;
  }
  if (text == "no_deformation") {
    return MapMode::NoDeformation;
  }
  if (text == "no_posenc") {
    return MapMode::NoPosenc;
  }
  throw PreconditionError(
      "unknown map mode '" + std::string(text) + "' (expected full, no_deformation or no_posenc)");
}

std::vector<double> positional_encoding(const Vec3& p, int octaves) {
  std::vector<double> out(static_cast<std::size_t>(6 * octaves));
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < octaves; ++k) {
      const double arg = std::ldexp(p[axis], k);
      out[static_cast<std::size_t>(positional_channel(axis, false, k, octaves))] = std::sin(arg);
      out[static_cast<std::size_t>(positional_channel(axis, true, k, octaves))] = std::cos(arg);
    }
  }
  return out;
}

EncodedTemplate normalize_template(const Vertices& vertices) {
  if (vertices.rows() == 0) {
    throw PreconditionError("cannot normalise an empty vertex set");
  }
  EncodedTemplate enc;
  enc.mean = vertices.colwise().mean().transpose();
  const Vertices centred = vertices.rowwise() - enc.mean.transpose();
  enc.scale = centred.cwiseAbs().maxCoeff();
  if (!(enc.scale > 0.0)) {
    throw PreconditionError("template vertices are degenerate (all identical)");
  }
  enc.normalized = centred / enc.scale;
  enc.per_vertex_pe.resize(vertices.rows(), kPositionalChannels);
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const auto pe = positional_encoding(enc.normalized.row(i).transpose());
    for (int c = 0; c < kPositionalChannels; ++c) {
      enc.per_vertex_pe(i, c) = pe[static_cast<std::size_t>(c)];
    }
  }
  return enc;
}

EncodedTemplate encode_template(const FaceModelAssets& assets) {
  return normalize_template(extended_template(assets));
}

VertexAttributes vertex_attributes(const EncodedTemplate& encoded, const PosedMesh& mesh, double sigma) {
  if (encoded.per_vertex_pe.rows() != mesh.vertices.rows()) {
    throw DimensionError(
        "encoded template has " + std::to_string(encoded.per_vertex_pe.rows()) +
        " vertices, mesh has " + std::to_string(mesh.vertices.rows()));
  }
  if (!(sigma > 0.0)) {
    throw PreconditionError("deformation sigma must be positive");
  }
  VertexAttributes a;
  a.positional = encoded.per_vertex_pe;
  a.deformation = mesh.expr_deformation / sigma;
  return a;
}

DriverMap assemble_driver_map(
    const RasterBuffer& raster,
    const Faces& faces,
    const VertexAttributes& attributes,
    MapMode mode,
    double sigma) {
  DriverMap map;
  map.width = raster.width;
  map.height = raster.height;
  map.mode = mode;
  map.sigma = sigma;
  const std::size_t plane = static_cast<std::size_t>(raster.width) * raster.height;
  map.data.assign(plane * kDriverMapChannels, 0.0f);

  auto write = [&](const Eigen::MatrixXd& values, int first_channel) {
    const AttributeImage img = interpolate_attribute(raster, faces, values);
    for (std::size_t i = 0; i < plane; ++i) {
      if (raster.face_index[i] < 0) {
        continue;
      }
      for (int c = 0; c < img.channels; ++c) {
        map.data[static_cast<std::size_t>(first_channel + c) * plane + i] =
            static_cast<float>(img.data[i * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(c)]);
      }
    }
  };
  if (mode != MapMode::NoPosenc) {
    write(attributes.positional, 0);
  }
  if (mode != MapMode::NoDeformation) {
    write(attributes.deformation, kFirstDeformationChannel);
  }
  return map;
}

DriverMap build_driver_map(
    const FaceModelAssets& assets,
    const EncodedTemplate& encoded,
    const Eigen::VectorXd& beta,
    const Eigen::VectorXd& psi,
    const PoseParams& pose,
    const Camera& camera,
    MapMode mode,
    const RasterOptions& options) {
  const PosedMesh mesh = evaluate_mesh(assets, beta, psi, pose);
  const Faces faces = render_faces(assets);
  const RasterBuffer raster = rasterize(mesh.vertices, faces, camera, options);
  const VertexAttributes attributes = vertex_attributes(encoded, mesh, assets.deformation_sigma);
  return assemble_driver_map(raster, faces, attributes, mode, assets.deformation_sigma);
}

DriverMap retarget(
    const FaceModelAssets& assets,
    const EncodedTemplate& encoded,
    const Eigen::VectorXd& beta_ref,
    const Camera& camera_ref,
    const Eigen::VectorXd& psi_drv,
    const PoseParams& pose_drv,
    MapMode mode,
    const RasterOptions& options) {
  return build_driver_map(assets, encoded, beta_ref, psi_drv, pose_drv, camera_ref, mode, options);
}

BroadcastGrid raw_vector_broadcast(
    const Eigen::VectorXd& beta,
    const Eigen::VectorXd& psi,
    const PoseParams& pose,
    int grid) {
  if (grid < 1) {
    throw PreconditionError("broadcast grid must be at least 1x1");
  }
  const Eigen::VectorXd theta = pose.flatten();
  Eigen::VectorXd v(beta.size() + psi.size() + theta.size());
  v << beta, psi, theta;
  BroadcastGrid out;
  out.channels = static_cast<int>(v.size());
  out.size = grid;
  const std::size_t plane = static_cast<std::size_t>(grid) * grid;
  out.data.resize(plane * static_cast<std::size_t>(out.channels));
  for (int c = 0; c < out.channels; ++c) {
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, static_cast<float>(v[c]));
  }
  return out;
}

std::vector<float> deformation_magnitude(const DriverMap& map) {
  const std::size_t plane = static_cast<std::size_t>(map.width) * map.height;
  std::vector<float> out(plane);
  const auto dx = map.channel(kFirstDeformationChannel);
  const auto dy = map.channel(kFirstDeformationChannel + 1);
  const auto dz = map.channel(kFirstDeformationChannel + 2);
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = std::sqrt(dx[i] * dx[i] + dy[i] * dy[i] + dz[i] * dz[i]);
  }
  return out;
}

TensorContainer driver_map_to_container(const DriverMap& map) {
  TensorContainer c;
  c.add<float>(
      "driver_map",
      {static_cast<std::uint32_t>(kDriverMapChannels),
       static_cast<std::uint32_t>(map.height),
       static_cast<std::uint32_t>(map.width)},
      map.data);
  c.add<std::int32_t>("meta_mode", {1}, {static_cast<std::int32_t>(map.mode)});
  c.add<double>("meta_sigma", {1}, {map.sigma});
  return c;
}

DriverMap driver_map_from_container(const TensorContainer& c) {
  const auto& e = c.at("driver_map");
  if (e.shape.size() != 3 || e.shape[0] != static_cast<std::uint32_t>(kDriverMapChannels)) {
    throw ParseError("driver_map", "expected shape (45, H, W)");
  }
  DriverMap map;
  map.height = static_cast<int>(e.shape[1]);
  map.width = static_cast<int>(e.shape[2]);
  map.data = e.values<float>();
  const auto mode = c.values<std::int32_t>("meta_mode");
  if (mode.size() != 1 || mode[0] < 0 || mode[0] > 2) {
    throw ParseError("meta_mode", "expected one of 0 (full), 1 (no_deformation), 2 (no_posenc)");
  }
  map.mode = static_cast<MapMode>(mode[0]);
  const auto sigma = c.values<double>("meta_sigma");
  if (sigma.size() != 1) {
    throw ParseError("meta_sigma", "expected a scalar");
  }
  map.sigma = sigma[0];
  return map;
}

} // namespace drivemap
