#pragma once

#include <Eigen/Dense>

#include "qgeom/error.h"

namespace qgeom {

using Index = Eigen::Index;

// Faces with area below this (after unit-sphere normalization) are treated
// as degenerate slivers: plane extraction rejects them and quadric
// accumulation skips them.
inline constexpr double kDegenerateFaceArea = 1e-12;

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

// One point per row. Used both for mesh vertices and point clouds.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

using FaceMatrix = Eigen::Matrix<Index, Eigen::Dynamic, 3>;

/// Plane a*x + b*y + c*z + d = 0 with unit normal (a,b,c).
template <typename Scalar>
struct Plane {
  Vec3<Scalar> normal = Vec3<Scalar>::UnitZ();
  Scalar offset = Scalar(0);

  Scalar signed_distance(const Vec3<Scalar>& p) const {
    return normal.dot(p) + offset;
  }

  Vec4<Scalar> coeffs() const {
    return Vec4<Scalar>(normal.x(), normal.y(), normal.z(), offset);
  }
};

/// Indexed triangle mesh: V is one vertex per row, F holds vertex-index
/// triples. Immutable by convention once built; operations return new meshes.
template <typename Scalar>
struct TriangleMesh {
  PointMatrix<Scalar> V;
  FaceMatrix F;

  Index vertex_count() const { return V.rows(); }
  Index face_count() const { return F.rows(); }
};

using TriangleMeshd = TriangleMesh<double>;
using Planed = Plane<double>;
using PointMatrixd = PointMatrix<double>;

/// Checks index bounds and per-face index distinctness. Throws Error on the
/// first violation found.
template <typename Scalar>
void validate_mesh(const TriangleMesh<Scalar>& mesh) {
  const Index nv = mesh.vertex_count();
  for (Index f = 0; f < mesh.F.rows(); ++f) {
    const Index a = mesh.F(f, 0), b = mesh.F(f, 1), c = mesh.F(f, 2);
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv)
      throw Error("face " + std::to_string(f) + " references vertex out of range");
    if (a == b || b == c || a == c)
      throw Error("face " + std::to_string(f) + " repeats a vertex index");
  }
  if (!mesh.V.allFinite()) throw Error("mesh has non-finite vertex coordinates");
}

template <typename Scalar>
void validate_cloud(const PointMatrix<Scalar>& points) {
  if (!points.allFinite()) throw Error("point cloud has non-finite coordinates");
}

}  // namespace qgeom
