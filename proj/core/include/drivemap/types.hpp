#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace drivemap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// N x 3 point set, one vertex per row.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// N_f x 3 triangle list of vertex indices.
using Faces = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

} // namespace drivemap
