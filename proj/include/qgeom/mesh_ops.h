#pragma once

#include <algorithm>
#include <numeric>
#include <tuple>
#include <vector>

#include "qgeom/rng.h"
#include "qgeom/types.h"

namespace qgeom {

template <typename Scalar>
Scalar face_area(const TriangleMesh<Scalar>& mesh, Index face) {
  const Vec3<Scalar> a = mesh.V.row(mesh.F(face, 0));
  const Vec3<Scalar> b = mesh.V.row(mesh.F(face, 1));
  const Vec3<Scalar> c = mesh.V.row(mesh.F(face, 2));
  return Scalar(0.5) * (b - a).cross(c - a).norm();
}

/// Plane of a face, normal following counter-clockwise winding.
/// Throws DegenerateFace below the sliver-area threshold.
template <typename Scalar>
Plane<Scalar> face_plane(const TriangleMesh<Scalar>& mesh, Index face) {
  const Vec3<Scalar> a = mesh.V.row(mesh.F(face, 0));
  const Vec3<Scalar> b = mesh.V.row(mesh.F(face, 1));
  const Vec3<Scalar> c = mesh.V.row(mesh.F(face, 2));
  const Vec3<Scalar> n = (b - a).cross(c - a);
  const Scalar len = n.norm();
  if (Scalar(0.5) * len < Scalar(kDegenerateFaceArea))
    throw DegenerateFace("face " + std::to_string(face) + " has near-zero area");
  Plane<Scalar> p;
  p.normal = n / len;
  p.offset = -p.normal.dot(a);
  return p;
}

/// Splits a mesh into its maximal components under shared-vertex
/// connectivity. Each component's vertices are re-indexed compactly,
/// preserving original vertex order; vertices used by no face are dropped.
/// Components come out ordered by their smallest original face index.
template <typename Scalar>
std::vector<TriangleMesh<Scalar>> connected_components(
    const TriangleMesh<Scalar>& mesh) {
  const Index nv = mesh.vertex_count();
  std::vector<Index> parent(nv);
  std::iota(parent.begin(), parent.end(), Index(0));
  auto find = [&parent](Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  for (Index f = 0; f < mesh.F.rows(); ++f) {
    unite(mesh.F(f, 0), mesh.F(f, 1));
    unite(mesh.F(f, 0), mesh.F(f, 2));
  }

  // component id per root, in order of first appearance over the face scan
  std::vector<Index> comp_of_root(nv, -1);
  std::vector<std::vector<Index>> comp_faces;
  for (Index f = 0; f < mesh.F.rows(); ++f) {
    const Index root = find(mesh.F(f, 0));
    if (comp_of_root[root] < 0) {
      comp_of_root[root] = static_cast<Index>(comp_faces.size());
      comp_faces.emplace_back();
    }
    comp_faces[comp_of_root[root]].push_back(f);
  }

  std::vector<TriangleMesh<Scalar>> out(comp_faces.size());
  std::vector<Index> remap(nv);
  for (size_t c = 0; c < comp_faces.size(); ++c) {
    std::fill(remap.begin(), remap.end(), Index(-1));
    Index next = 0;
    // first pass assigns compact ids in ascending original-vertex order
    std::vector<Index> used;
    for (Index f : comp_faces[c])
      for (int k = 0; k < 3; ++k) used.push_back(mesh.F(f, k));
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (Index v : used) remap[v] = next++;

    out[c].V.resize(next, 3);
    for (Index v : used) out[c].V.row(remap[v]) = mesh.V.row(v);
    out[c].F.resize(static_cast<Index>(comp_faces[c].size()), 3);
    for (size_t i = 0; i < comp_faces[c].size(); ++i)
      for (int k = 0; k < 3; ++k)
        out[c].F(static_cast<Index>(i), k) = remap[mesh.F(comp_faces[c][i], k)];
  }
  return out;
}

/// Centers the bounding box at the origin and scales so the farthest vertex
/// sits at distance 1. Returns (mesh, center, scale) with
/// out = (in - center) * scale.
template <typename Scalar>
std::tuple<TriangleMesh<Scalar>, Vec3<Scalar>, Scalar> normalize_unit_sphere(
    const TriangleMesh<Scalar>& mesh) {
  if (mesh.vertex_count() == 0)
    throw DegenerateGeometry("cannot normalize an empty mesh");
  const Vec3<Scalar> lo = mesh.V.colwise().minCoeff();
  const Vec3<Scalar> hi = mesh.V.colwise().maxCoeff();
  const Vec3<Scalar> center = (lo + hi) / Scalar(2);
  const Scalar radius =
      (mesh.V.rowwise() - center.transpose()).rowwise().norm().maxCoeff();
  if (radius < Scalar(1e-12) * (Scalar(1) + center.norm()))
    throw DegenerateGeometry("all vertices coincide");
  TriangleMesh<Scalar> out;
  out.V = (mesh.V.rowwise() - center.transpose()) / radius;
  out.F = mesh.F;
  return {out, center, Scalar(1) / radius};
}

/// Area-weighted vertex normals, unit length. Throws IsolatedVertex for a
/// vertex with no non-degenerate incident face.
template <typename Scalar>
PointMatrix<Scalar> vertex_normals(const TriangleMesh<Scalar>& mesh) {
  PointMatrix<Scalar> acc = PointMatrix<Scalar>::Zero(mesh.vertex_count(), 3);
  std::vector<int> incident(mesh.vertex_count(), 0);
  for (Index f = 0; f < mesh.F.rows(); ++f) {
    const Vec3<Scalar> a = mesh.V.row(mesh.F(f, 0));
    const Vec3<Scalar> b = mesh.V.row(mesh.F(f, 1));
    const Vec3<Scalar> c = mesh.V.row(mesh.F(f, 2));
    const Vec3<Scalar> area_vec = Scalar(0.5) * (b - a).cross(c - a);
    if (area_vec.norm() < Scalar(kDegenerateFaceArea)) continue;
    for (int k = 0; k < 3; ++k) {
      acc.row(mesh.F(f, k)) += area_vec.transpose();
      ++incident[mesh.F(f, k)];
    }
  }
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    if (incident[v] == 0)
      throw IsolatedVertex("vertex " + std::to_string(v) +
                           " has no non-degenerate incident face");
    const Scalar len = acc.row(v).norm();
    if (len < Scalar(1e-20))
      throw DegenerateGeometry("incident face normals of vertex " +
                               std::to_string(v) + " cancel out");
    acc.row(v) /= len;
  }
  return acc;
}

/// Per-vertex lists of incident face indices, in face-scan order.
template <typename Scalar>
std::vector<std::vector<Index>> vertex_face_adjacency(
    const TriangleMesh<Scalar>& mesh) {
  std::vector<std::vector<Index>> out(mesh.vertex_count());
  for (Index f = 0; f < mesh.F.rows(); ++f)
    for (int k = 0; k < 3; ++k) out[mesh.F(f, k)].push_back(f);
  return out;
}

/// Per-vertex 1-ring neighbor vertex indices, ascending.
template <typename Scalar>
std::vector<std::vector<Index>> one_ring_neighbors(
    const TriangleMesh<Scalar>& mesh) {
  std::vector<std::vector<Index>> out(mesh.vertex_count());
  for (Index f = 0; f < mesh.F.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      out[mesh.F(f, k)].push_back(mesh.F(f, (k + 1) % 3));
      out[mesh.F(f, k)].push_back(mesh.F(f, (k + 2) % 3));
    }
  }
  for (auto& nbrs : out) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return out;
}

/// Samples `count` points uniformly by area: face chosen proportional to its
/// area, position barycentric-uniform within the face. Pure function of
/// (mesh, count, seed).
template <typename Scalar>
PointMatrix<Scalar> sample_surface(const TriangleMesh<Scalar>& mesh,
                                   Index count, std::uint64_t seed) {
  PointMatrix<Scalar> out(count, 3);
  if (count == 0) return out;
  std::vector<double> cum(mesh.F.rows());
  double total = 0;
  for (Index f = 0; f < mesh.F.rows(); ++f) {
    total += static_cast<double>(face_area(mesh, f));
    cum[f] = total;
  }
  if (!(total > 0)) throw DegenerateGeometry("mesh has zero total area");

  Rng rng(seed);
  for (Index i = 0; i < count; ++i) {
    const double u = rng.uniform(total);
    const Index f = static_cast<Index>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    const Index fc = std::min(f, mesh.F.rows() - 1);
    const Vec3<Scalar> a = mesh.V.row(mesh.F(fc, 0));
    const Vec3<Scalar> b = mesh.V.row(mesh.F(fc, 1));
    const Vec3<Scalar> c = mesh.V.row(mesh.F(fc, 2));
    const Scalar r1 = std::sqrt(static_cast<Scalar>(rng.uniform()));
    const Scalar r2 = static_cast<Scalar>(rng.uniform());
    out.row(i) =
        ((Scalar(1) - r1) * a + r1 * (Scalar(1) - r2) * b + r1 * r2 * c)
            .transpose();
  }
  return out;
}

}  // namespace qgeom
