#pragma once

#include <array>
#include <vector>

#include "qgeom/mesh_ops.h"
#include "qgeom/types.h"

namespace qgeom {

/// Symmetric 4x4 quadric form Q stored as the 10 upper-triangular
/// coefficients, row-major:
///
///   [ q0 q1 q2 q3 ]
///   [  . q4 q5 q6 ]
///   [  .  . q7 q8 ]
///   [  .  .  . q9 ]
///
/// For a plane with unit normal (a,b,c) and offset d, the rank-one quadric
/// p p^T with p = (a,b,c,d) evaluates to the squared point-plane distance.
/// Sums of such quadrics stay symmetric, so the compressed form is closed
/// under accumulation.
template <typename Scalar>
struct Quadric {
  std::array<Scalar, 10> q{};

  static Quadric from_plane(const Plane<Scalar>& plane) {
    const Scalar a = plane.normal.x(), b = plane.normal.y(),
                 c = plane.normal.z(), d = plane.offset;
    Quadric out;
    out.q = {a * a, a * b, a * c, a * d,  //
             b * b, b * c, b * d,         //
             c * c, c * d,                //
             d * d};
    return out;
  }

  Quadric& operator+=(const Quadric& other) {
    for (int i = 0; i < 10; ++i) q[i] += other.q[i];
    return *this;
  }
  friend Quadric operator+(Quadric lhs, const Quadric& rhs) { return lhs += rhs; }

  Quadric operator*(Scalar w) const {
    Quadric out;
    for (int i = 0; i < 10; ++i) out.q[i] = q[i] * w;
    return out;
  }

  /// s^T Q s for s = (x, y, z, 1).
  Scalar eval(const Vec3<Scalar>& s) const {
    const Scalar x = s.x(), y = s.y(), z = s.z();
    return q[0] * x * x + q[4] * y * y + q[7] * z * z + q[9] +
           Scalar(2) * (q[1] * x * y + q[2] * x * z + q[5] * y * z +  //
                        q[3] * x + q[6] * y + q[8] * z);
  }

  /// d/ds [s^T Q s] = 2 (A s + b), with A the position block and b the
  /// offset column of Q.
  Vec3<Scalar> gradient(const Vec3<Scalar>& s) const {
    const Scalar x = s.x(), y = s.y(), z = s.z();
    return Scalar(2) * Vec3<Scalar>(q[0] * x + q[1] * y + q[2] * z + q[3],
                                    q[1] * x + q[4] * y + q[5] * z + q[6],
                                    q[2] * x + q[5] * y + q[7] * z + q[8]);
  }

  /// Position block A (3x3, symmetric).
  Eigen::Matrix<Scalar, 3, 3> position_block() const {
    Eigen::Matrix<Scalar, 3, 3> A;
    A << q[0], q[1], q[2],  //
        q[1], q[4], q[5],   //
        q[2], q[5], q[7];
    return A;
  }

  /// Offset column b (the mixed position/homogeneous terms).
  Vec3<Scalar> offset_column() const { return {q[3], q[6], q[8]}; }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> Q;
    Q << q[0], q[1], q[2], q[3],  //
        q[1], q[4], q[5], q[6],   //
        q[2], q[5], q[7], q[8],   //
        q[3], q[6], q[8], q[9];
    return Q;
  }
};

using Quadricd = Quadric<double>;

template <typename Scalar>
struct VertexQuadrics {
  std::vector<Quadric<Scalar>> quadrics;
  /// Faces below the degenerate-area threshold contribute no plane.
  Index skipped_faces = 0;
  /// Vertices whose every incident face was skipped (or that have none).
  std::vector<Index> isolated_vertices;
};

/// Per-vertex quadrics: each vertex accumulates the plane quadrics of its
/// incident faces, unweighted by default. With area weighting each face's
/// quadric is scaled by the face area before accumulation.
template <typename Scalar>
VertexQuadrics<Scalar> accumulate_vertex_quadrics(
    const TriangleMesh<Scalar>& mesh, bool area_weighted = false) {
  VertexQuadrics<Scalar> out;
  out.quadrics.assign(mesh.vertex_count(), Quadric<Scalar>{});
  std::vector<char> touched(mesh.vertex_count(), 0);
  for (Index f = 0; f < mesh.face_count(); ++f) {
    const Scalar area = face_area(mesh, f);
    if (area < Scalar(kDegenerateFaceArea)) {
      ++out.skipped_faces;
      continue;
    }
    Quadric<Scalar> fq = Quadric<Scalar>::from_plane(face_plane(mesh, f));
    if (area_weighted) fq = fq * area;
    for (int k = 0; k < 3; ++k) {
      const Index v = mesh.F(f, k);
      out.quadrics[v] += fq;
      touched[v] = 1;
    }
  }
  for (Index v = 0; v < mesh.vertex_count(); ++v)
    if (!touched[v]) out.isolated_vertices.push_back(v);
  return out;
}

}  // namespace qgeom
