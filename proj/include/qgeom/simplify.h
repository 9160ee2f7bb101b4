#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <queue>
#include <utility>
#include <vector>

#include "qgeom/mesh_ops.h"
#include "qgeom/quadric.h"
#include "qgeom/types.h"

namespace qgeom {

template <typename Scalar>
struct PlacementResult {
  Vec3<Scalar> position;
  Scalar cost;
  /// False when the 3x3 system was singular and an endpoint/midpoint
  /// fallback was used instead.
  bool solved;
};

/// Quadric-optimal position for a contraction. Solves A x = -b from the
/// quadric's partition when A is safely invertible (positive eigenvalues,
/// condition number under 1e8); otherwise evaluates the two endpoints and
/// their midpoint and keeps the cheapest, earlier candidates winning ties.
template <typename Scalar>
PlacementResult<Scalar> optimal_placement(const Quadric<Scalar>& Q,
                                          const Vec3<Scalar>& fallback_a,
                                          const Vec3<Scalar>& fallback_b) {
  const Eigen::Matrix<Scalar, 3, 3> A = Q.position_block();
  const Vec3<Scalar> b = Q.offset_column();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 3, 3>> eig(A);
  const Vec3<Scalar> ev = eig.eigenvalues();
  if (ev[0] > 0 && ev[2] / ev[0] < Scalar(1e8)) {
    const Vec3<Scalar> x =
        eig.eigenvectors() *
        ((eig.eigenvectors().transpose() * (-b)).array() / ev.array()).matrix();
    return {x, Q.eval(x), true};
  }
  PlacementResult<Scalar> best{fallback_a, Q.eval(fallback_a), false};
  const Vec3<Scalar> mid = (fallback_a + fallback_b) / Scalar(2);
  for (const Vec3<Scalar>& cand : {fallback_b, mid}) {
    const Scalar cost = Q.eval(cand);
    if (cost < best.cost) best = {cand, cost, false};
  }
  return best;
}

template <typename Scalar>
struct SimplifyResult {
  TriangleMesh<Scalar> mesh;
  Scalar total_cost = 0;
  /// False when the queue ran dry (every remaining collapse would flip a
  /// face) before hitting the vertex target.
  bool reached_target = true;
  Index collapses = 0;
};

namespace detail {

template <typename Scalar>
struct CollapseEntry {
  Scalar cost;
  Index a, b;  // a < b
  unsigned version_a, version_b;
  Vec3<Scalar> position;
};

template <typename Scalar>
struct CollapseEntryOrder {
  // min-heap on (cost, a, b)
  bool operator()(const CollapseEntry<Scalar>& x,
                  const CollapseEntry<Scalar>& y) const {
    if (x.cost != y.cost) return x.cost > y.cost;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

template <typename Scalar>
Vec3<Scalar> face_direction(const Vec3<Scalar>& a, const Vec3<Scalar>& b,
                            const Vec3<Scalar>& c) {
  return (b - a).cross(c - a);
}

}  // namespace detail

/// Greedy quadric edge collapse down to `target_vertices`. Vertex quadrics
/// accumulate per incident face; each boundary edge adds a penalty quadric
/// (the plane through the edge perpendicular to its single incident face,
/// weight 1) to both endpoints, so open borders resist drifting inward.
/// Collapses that would flip or degenerate a surviving face are rejected.
/// The queue uses lazy invalidation: entries carry the endpoint versions
/// they were computed from and are dropped when stale.
template <typename Scalar>
SimplifyResult<Scalar> simplify_to(const TriangleMesh<Scalar>& mesh,
                                   Index target_vertices) {
  if (target_vertices < 4)
    throw TargetTooSmall("cannot target fewer than 4 vertices");
  validate_mesh(mesh);
  const Index nv = mesh.vertex_count();
  if (nv <= target_vertices) return {mesh, Scalar(0), true, 0};

  std::vector<Vec3<Scalar>> pos(nv);
  for (Index i = 0; i < nv; ++i) pos[i] = mesh.V.row(i);
  std::vector<Quadric<Scalar>> quadric =
      accumulate_vertex_quadrics(mesh).quadrics;

  // faces as mutable records; dead ones get a tombstone
  std::vector<std::array<Index, 3>> faces(mesh.face_count());
  std::vector<char> face_alive(mesh.face_count(), 1);
  std::vector<std::vector<Index>> vfaces(nv);
  for (Index f = 0; f < mesh.face_count(); ++f) {
    faces[f] = {mesh.F(f, 0), mesh.F(f, 1), mesh.F(f, 2)};
    for (const Index v : faces[f]) vfaces[v].push_back(f);
  }

  // edge gathering doubles as boundary detection
  std::map<std::pair<Index, Index>, std::vector<Index>> edge_faces;
  for (Index f = 0; f < mesh.face_count(); ++f)
    for (int k = 0; k < 3; ++k) {
      const Index u = faces[f][k], v = faces[f][(k + 1) % 3];
      edge_faces[{std::min(u, v), std::max(u, v)}].push_back(f);
    }
  for (const auto& [edge, incident] : edge_faces) {
    if (incident.size() != 1) continue;
    const Index f = incident[0];
    if (face_area(mesh, f) < Scalar(kDegenerateFaceArea)) continue;
    const Vec3<Scalar> n = face_plane(mesh, f).normal;
    const Vec3<Scalar> e = pos[edge.second] - pos[edge.first];
    Vec3<Scalar> m = n.cross(e);
    const Scalar len = m.norm();
    if (len < Scalar(1e-12)) continue;
    m /= len;
    Plane<Scalar> wall{m, -m.dot(pos[edge.first])};
    const Quadric<Scalar> penalty = Quadric<Scalar>::from_plane(wall);
    quadric[edge.first] += penalty;
    quadric[edge.second] += penalty;
  }

  std::vector<char> alive(nv, 1);
  std::vector<unsigned> version(nv, 0);
  std::priority_queue<detail::CollapseEntry<Scalar>,
                      std::vector<detail::CollapseEntry<Scalar>>,
                      detail::CollapseEntryOrder<Scalar>>
      queue;
  auto push_edge = [&](Index a, Index b) {
    if (a > b) std::swap(a, b);
    const auto placed = optimal_placement(quadric[a] + quadric[b], pos[a], pos[b]);
    queue.push({placed.cost, a, b, version[a], version[b], placed.position});
  };
  for (const auto& [edge, incident] : edge_faces) push_edge(edge.first, edge.second);

  auto is_edge = [&](Index a, Index b) {
    for (const Index f : vfaces[a]) {
      if (!face_alive[f]) continue;
      const auto& tri = faces[f];
      if (tri[0] == b || tri[1] == b || tri[2] == b) return true;
    }
    return false;
  };

  // Rejects the collapse when any surviving face around the union ring
  // would invert its orientation or collapse to a sliver at the new
  // position.
  auto flips_faces = [&](Index a, Index b, const Vec3<Scalar>& p) {
    for (const Index v : {a, b}) {
      for (const Index f : vfaces[v]) {
        if (!face_alive[f]) continue;
        const auto& tri = faces[f];
        const bool has_a = tri[0] == a || tri[1] == a || tri[2] == a;
        const bool has_b = tri[0] == b || tri[1] == b || tri[2] == b;
        if (has_a && has_b) continue;  // dies with the collapse
        Vec3<Scalar> before[3], after[3];
        for (int k = 0; k < 3; ++k) {
          before[k] = pos[tri[k]];
          after[k] = (tri[k] == a || tri[k] == b) ? p : before[k];
        }
        const Vec3<Scalar> n0 =
            detail::face_direction(before[0], before[1], before[2]);
        const Vec3<Scalar> n1 =
            detail::face_direction(after[0], after[1], after[2]);
        if (Scalar(0.5) * n0.norm() < Scalar(kDegenerateFaceArea)) continue;
        if (Scalar(0.5) * n1.norm() < Scalar(kDegenerateFaceArea)) return true;
        if (n0.dot(n1) <= 0) return true;
      }
    }
    return false;
  };

  SimplifyResult<Scalar> result;
  Index alive_count = nv;
  while (alive_count > target_vertices && !queue.empty()) {
    const auto entry = queue.top();
    queue.pop();
    const Index a = entry.a, b = entry.b;
    if (!alive[a] || !alive[b]) continue;
    if (entry.version_a != version[a] || entry.version_b != version[b]) continue;
    if (!is_edge(a, b)) continue;
    if (flips_faces(a, b, entry.position)) continue;

    // collapse b into a
    for (const Index f : vfaces[b]) {
      if (!face_alive[f]) continue;
      auto& tri = faces[f];
      const bool has_a = tri[0] == a || tri[1] == a || tri[2] == a;
      if (has_a) {
        face_alive[f] = 0;
        continue;
      }
      for (int k = 0; k < 3; ++k)
        if (tri[k] == b) tri[k] = a;
      vfaces[a].push_back(f);
    }
    pos[a] = entry.position;
    quadric[a] += quadric[b];
    alive[b] = 0;
    ++version[a];
    --alive_count;
    result.total_cost += entry.cost;
    ++result.collapses;

    // requeue the surviving ring around a
    std::vector<Index> ring;
    for (const Index f : vfaces[a]) {
      if (!face_alive[f]) continue;
      for (const Index v : faces[f])
        if (v != a) ring.push_back(v);
    }
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    for (const Index n : ring) push_edge(a, n);
  }
  result.reached_target = alive_count <= target_vertices;

  // compact re-index, preserving original vertex and face order
  std::vector<Index> remap(nv, -1);
  Index next = 0;
  for (Index v = 0; v < nv; ++v)
    if (alive[v]) remap[v] = next++;
  result.mesh.V.resize(next, 3);
  for (Index v = 0; v < nv; ++v)
    if (alive[v]) result.mesh.V.row(remap[v]) = pos[v].transpose();
  std::vector<std::array<Index, 3>> kept;
  for (Index f = 0; f < static_cast<Index>(faces.size()); ++f) {
    if (!face_alive[f]) continue;
    kept.push_back({remap[faces[f][0]], remap[faces[f][1]], remap[faces[f][2]]});
  }
  result.mesh.F.resize(static_cast<Index>(kept.size()), 3);
  for (Index f = 0; f < result.mesh.F.rows(); ++f)
    for (int k = 0; k < 3; ++k) result.mesh.F(f, k) = kept[f][k];
  validate_mesh(result.mesh);
  return result;
}

}  // namespace qgeom
