#pragma once

#include "qgeom/error.h"
#include "qgeom/types.h"

namespace qgeom {

/// Which Voronoi region of the triangle the closest point fell in. Edge k
/// joins vertex k to vertex (k+1) mod 3.
enum class TriangleRegion {
  Face,
  Edge0,
  Edge1,
  Edge2,
  Vertex0,
  Vertex1,
  Vertex2,
};

template <typename Scalar>
struct PointTriangleResult {
  Scalar sq_dist;
  Vec3<Scalar> closest;
  TriangleRegion region;
};

/// Exact closest point on a triangle, by walking the seven Voronoi regions
/// of the triangle (interior, three edges, three corners). Region boundaries
/// resolve toward the lower-dimensional feature, so results on a shared edge
/// agree between the two incident triangles.
template <typename Scalar>
PointTriangleResult<Scalar> point_triangle_sqdist(const Vec3<Scalar>& p,
                                                  const Vec3<Scalar>& a,
                                                  const Vec3<Scalar>& b,
                                                  const Vec3<Scalar>& c) {
  const Vec3<Scalar> ab = b - a, ac = c - a;
  if (Scalar(0.5) * ab.cross(ac).norm() < Scalar(kDegenerateFaceArea))
    throw DegenerateFace("closest-point query on a degenerate triangle");

  auto finish = [&](const Vec3<Scalar>& closest, TriangleRegion region) {
    return PointTriangleResult<Scalar>{(p - closest).squaredNorm(), closest,
                                       region};
  };

  const Vec3<Scalar> ap = p - a;
  const Scalar d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return finish(a, TriangleRegion::Vertex0);

  const Vec3<Scalar> bp = p - b;
  const Scalar d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return finish(b, TriangleRegion::Vertex1);

  const Scalar vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const Scalar t = d1 / (d1 - d3);
    return finish(a + t * ab, TriangleRegion::Edge0);
  }

  const Vec3<Scalar> cp = p - c;
  const Scalar d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return finish(c, TriangleRegion::Vertex2);

  const Scalar vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const Scalar t = d2 / (d2 - d6);
    return finish(a + t * ac, TriangleRegion::Edge2);
  }

  const Scalar va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0) {
    const Scalar t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(b + t * (c - b), TriangleRegion::Edge1);
  }

  const Scalar denom = Scalar(1) / (va + vb + vc);
  return finish(a + ab * (vb * denom) + ac * (vc * denom),
                TriangleRegion::Face);
}

template <typename Scalar>
PointTriangleResult<Scalar> point_triangle_sqdist(
    const Vec3<Scalar>& p, const TriangleMesh<Scalar>& mesh, Index face) {
  return point_triangle_sqdist<Scalar>(p, mesh.V.row(mesh.F(face, 0)),
                                       mesh.V.row(mesh.F(face, 1)),
                                       mesh.V.row(mesh.F(face, 2)));
}

}  // namespace qgeom
