#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "qgeom/kdtree.h"
#include "qgeom/mesh_ops.h"
#include "qgeom/parallel.h"
#include "qgeom/point_triangle.h"
#include "qgeom/quadric.h"
#include "qgeom/types.h"

namespace qgeom {

/// Scalar loss plus one gradient row per output point.
template <typename Scalar>
struct LossValue {
  Scalar value = 0;
  PointMatrix<Scalar> gradients;
};

template <typename Scalar>
struct LossWeights {
  Scalar chamfer = 0;
  Scalar quadric = 0;
  Scalar normal = 0;
  Scalar surface = 0;

  bool any_enabled() const {
    return chamfer > 0 || quadric > 0 || normal > 0 || surface > 0;
  }
};

struct CorrespondenceMap {
  std::vector<Index> out_to_in;
  std::vector<Index> in_to_out;
};

enum class NormalLossKind { Squared, Absolute };

/// Bidirectional exact nearest-neighbor maps; ties go to the lowest index.
template <typename Scalar>
CorrespondenceMap correspondences(const PointMatrix<Scalar>& output,
                                  const PointMatrix<Scalar>& input_vertices) {
  const KdTree<Scalar> in_tree(input_vertices);
  const KdTree<Scalar> out_tree(output);
  return {in_tree.nearest_all(output), out_tree.nearest_all(input_vertices)};
}

namespace detail {

// Sums parallel-computed per-point terms sequentially, so the scalar does
// not depend on the thread count.
template <typename Scalar>
Scalar ordered_sum(const std::vector<Scalar>& terms) {
  Scalar total = 0;
  for (const Scalar t : terms) total += t;
  return total;
}

inline void require(bool cond, const char* what) {
  if (!cond) throw SizeMismatch(what);
}

}  // namespace detail

/// Mean quadric error of each output point against the accumulated quadric
/// of its corresponding input vertex. The correspondence is treated as a
/// constant of the evaluation, so the gradient is just the quadric-form
/// gradient scaled by 1/N.
template <typename Scalar>
LossValue<Scalar> quadric_loss(const PointMatrix<Scalar>& output,
                               const std::vector<Quadric<Scalar>>& vertex_quadrics,
                               const std::vector<Index>& out_to_in) {
  const Index n = output.rows();
  if (n == 0) throw EmptyInput("quadric loss over an empty output cloud");
  detail::require(static_cast<Index>(out_to_in.size()) == n,
                  "correspondence length != output point count");
  for (Index i = 0; i < n; ++i)
    detail::require(out_to_in[i] >= 0 &&
                        out_to_in[i] < static_cast<Index>(vertex_quadrics.size()),
                    "correspondence index outside quadric table");

  LossValue<Scalar> out;
  out.gradients.resize(n, 3);
  std::vector<Scalar> terms(n);
  const Scalar inv_n = Scalar(1) / Scalar(n);
  parallel_for(n, [&](Index i) {
    const Quadric<Scalar>& Q = vertex_quadrics[out_to_in[i]];
    const Vec3<Scalar> s = output.row(i);
    terms[i] = Q.eval(s);
    out.gradients.row(i) = (inv_n * Q.gradient(s)).transpose();
  });
  out.value = detail::ordered_sum(terms) * inv_n;
  return out;
}

/// Chamfer distance with externally supplied correspondences (held fixed for
/// differentiation): mean squared nearest-neighbor distance in each
/// direction. The input->output direction scatters gradient onto whichever
/// output point each input vertex matched.
template <typename Scalar>
LossValue<Scalar> chamfer_loss(const PointMatrix<Scalar>& output,
                               const PointMatrix<Scalar>& input_vertices,
                               const CorrespondenceMap& corr) {
  const Index n_out = output.rows(), n_in = input_vertices.rows();
  if (n_out == 0 || n_in == 0) throw EmptyInput("chamfer over an empty cloud");
  detail::require(static_cast<Index>(corr.out_to_in.size()) == n_out,
                  "out_to_in length != output point count");
  detail::require(static_cast<Index>(corr.in_to_out.size()) == n_in,
                  "in_to_out length != input vertex count");

  LossValue<Scalar> out;
  out.gradients = PointMatrix<Scalar>::Zero(n_out, 3);
  const Scalar inv_out = Scalar(1) / Scalar(n_out);
  const Scalar inv_in = Scalar(1) / Scalar(n_in);

  std::vector<Scalar> fwd(n_out), bwd(n_in);
  parallel_for(n_out, [&](Index i) {
    const Vec3<Scalar> diff =
        Vec3<Scalar>(output.row(i)) - Vec3<Scalar>(input_vertices.row(corr.out_to_in[i]));
    fwd[i] = diff.squaredNorm();
    out.gradients.row(i) = (Scalar(2) * inv_out * diff).transpose();
  });
  parallel_for(n_in, [&](Index t) {
    bwd[t] = (Vec3<Scalar>(input_vertices.row(t)) -
              Vec3<Scalar>(output.row(corr.in_to_out[t])))
                 .squaredNorm();
  });
  // scatter pass stays sequential: several input vertices can match the same
  // output point
  for (Index t = 0; t < n_in; ++t) {
    const Index i = corr.in_to_out[t];
    out.gradients.row(i) +=
        (Scalar(2) * inv_in *
         (Vec3<Scalar>(output.row(i)) - Vec3<Scalar>(input_vertices.row(t))))
            .transpose();
  }
  out.value =
      detail::ordered_sum(fwd) * inv_out + detail::ordered_sum(bwd) * inv_in;
  return out;
}

template <typename Scalar>
LossValue<Scalar> chamfer_loss(const PointMatrix<Scalar>& output,
                               const PointMatrix<Scalar>& input_vertices) {
  return chamfer_loss(output, input_vertices,
                      correspondences(output, input_vertices));
}

/// Penalizes the component of each edge (output point -> neighbor of its
/// corresponding input vertex) along that vertex's normal, averaged over the
/// 1-ring and over points. Squared by default; the absolute variant swaps
/// the per-term penalty for |<s - x_i, n>|.
template <typename Scalar>
LossValue<Scalar> normal_loss(const PointMatrix<Scalar>& output,
                              const PointMatrix<Scalar>& input_vertices,
                              const PointMatrix<Scalar>& input_normals,
                              const std::vector<std::vector<Index>>& neighbor_lists,
                              const std::vector<Index>& out_to_in,
                              NormalLossKind kind = NormalLossKind::Squared) {
  const Index n = output.rows();
  if (n == 0) throw EmptyInput("normal loss over an empty output cloud");
  detail::require(static_cast<Index>(out_to_in.size()) == n,
                  "correspondence length != output point count");
  detail::require(input_normals.rows() == input_vertices.rows(),
                  "normal count != input vertex count");
  detail::require(static_cast<Index>(neighbor_lists.size()) ==
                      input_vertices.rows(),
                  "neighbor-list count != input vertex count");
  for (Index i = 0; i < n; ++i) {
    const Index t = out_to_in[i];
    detail::require(t >= 0 && t < input_vertices.rows(),
                    "correspondence index outside input cloud");
    if (neighbor_lists[t].empty())
      throw EmptyNeighborhood("input vertex " + std::to_string(t) +
                              " has no 1-ring neighbors");
  }

  LossValue<Scalar> out;
  out.gradients.resize(n, 3);
  std::vector<Scalar> terms(n);
  const Scalar inv_n = Scalar(1) / Scalar(n);
  parallel_for(n, [&](Index i) {
    const Index t = out_to_in[i];
    const Vec3<Scalar> s = output.row(i);
    const Vec3<Scalar> nrm = input_normals.row(t);
    const auto& ring = neighbor_lists[t];
    const Scalar inv_ring = Scalar(1) / Scalar(ring.size());
    Scalar acc = 0;
    Vec3<Scalar> grad = Vec3<Scalar>::Zero();
    for (const Index x : ring) {
      const Scalar inner = nrm.dot(s - Vec3<Scalar>(input_vertices.row(x)));
      if (kind == NormalLossKind::Squared) {
        acc += inner * inner;
        grad += Scalar(2) * inner * nrm;
      } else {
        acc += std::abs(inner);
        if (inner > 0) grad += nrm;
        else if (inner < 0) grad -= nrm;
      }
    }
    terms[i] = acc * inv_ring;
    out.gradients.row(i) = (inv_n * inv_ring * grad).transpose();
  });
  out.value = detail::ordered_sum(terms) * inv_n;
  return out;
}

/// Mean over output points of the minimum squared point-triangle distance,
/// the candidate triangles being those incident to the corresponding input
/// vertex. Gradient points from the closest surface point toward the output
/// point, with the arg-min triangle held fixed.
template <typename Scalar>
LossValue<Scalar> surface_loss(const PointMatrix<Scalar>& output,
                               const TriangleMesh<Scalar>& mesh,
                               const std::vector<std::vector<Index>>& vertex_faces,
                               const std::vector<Index>& out_to_in) {
  const Index n = output.rows();
  if (n == 0) throw EmptyInput("surface loss over an empty output cloud");
  detail::require(static_cast<Index>(out_to_in.size()) == n,
                  "correspondence length != output point count");
  detail::require(static_cast<Index>(vertex_faces.size()) == mesh.vertex_count(),
                  "vertex-face adjacency size != vertex count");

  LossValue<Scalar> out;
  out.gradients.resize(n, 3);
  std::vector<Scalar> terms(n);
  const Scalar inv_n = Scalar(1) / Scalar(n);

  // EmptyNeighborhood-style precheck kept sequential so the error is
  // deterministic and not racing the parallel loop.
  for (Index i = 0; i < n; ++i) {
    const Index t = out_to_in[i];
    detail::require(t >= 0 && t < mesh.vertex_count(),
                    "correspondence index outside mesh vertices");
    if (vertex_faces[t].empty())
      throw NoCandidateTriangles("input vertex " + std::to_string(t) +
                                 " has no incident faces");
  }

  parallel_for(n, [&](Index i) {
    const Vec3<Scalar> s = output.row(i);
    Scalar best = std::numeric_limits<Scalar>::infinity();
    Vec3<Scalar> best_closest = Vec3<Scalar>::Zero();
    for (const Index f : vertex_faces[out_to_in[i]]) {
      const auto r = point_triangle_sqdist<Scalar>(s, mesh, f);
      // strict improvement keeps the lowest face index on ties
      if (r.sq_dist < best) {
        best = r.sq_dist;
        best_closest = r.closest;
      }
    }
    terms[i] = best;
    out.gradients.row(i) = (Scalar(2) * inv_n * (s - best_closest)).transpose();
  });
  out.value = detail::ordered_sum(terms) * inv_n;
  return out;
}

/// Everything the losses need about the target mesh, computed once.
template <typename Scalar>
struct InputBundle {
  TriangleMesh<Scalar> mesh;
  std::vector<Quadric<Scalar>> vertex_quadrics;
  PointMatrix<Scalar> vertex_normals;
  std::vector<std::vector<Index>> one_ring;
  std::vector<std::vector<Index>> vertex_faces;
  std::shared_ptr<const KdTree<Scalar>> vertex_index;
};

template <typename Scalar>
InputBundle<Scalar> make_input_bundle(const TriangleMesh<Scalar>& mesh) {
  validate_mesh(mesh);
  InputBundle<Scalar> bundle;
  bundle.mesh = mesh;
  bundle.vertex_quadrics = accumulate_vertex_quadrics(mesh).quadrics;
  bundle.vertex_normals = vertex_normals(mesh);
  bundle.one_ring = one_ring_neighbors(mesh);
  bundle.vertex_faces = vertex_face_adjacency(mesh);
  bundle.vertex_index = std::make_shared<const KdTree<Scalar>>(mesh.V);
  return bundle;
}

template <typename Scalar>
struct LossBreakdown {
  Scalar total = 0;
  Scalar chamfer = 0;
  Scalar quadric = 0;
  Scalar normal = 0;
  Scalar surface = 0;
  PointMatrix<Scalar> gradients;
};

/// Weighted combination under the given correspondences. Components with
/// zero weight contribute nothing to the total or the gradient, but their
/// scalars are still evaluated for diagnostics (NaN when a disabled
/// component cannot be computed, e.g. an isolated vertex breaking the
/// normal loss).
template <typename Scalar>
LossBreakdown<Scalar> combined_loss(const PointMatrix<Scalar>& output,
                                    const InputBundle<Scalar>& bundle,
                                    const LossWeights<Scalar>& weights,
                                    const CorrespondenceMap& corr,
                                    NormalLossKind normal_kind = NormalLossKind::Squared) {
  if (!weights.any_enabled())
    throw Error("at least one loss weight must be positive");
  const Index n = output.rows();
  if (n == 0) throw EmptyInput("combined loss over an empty output cloud");

  LossBreakdown<Scalar> out;
  out.gradients = PointMatrix<Scalar>::Zero(n, 3);
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();

  auto fold = [&](Scalar weight, auto&& eval) -> Scalar {
    if (weight > 0) {
      LossValue<Scalar> lv = eval();
      out.gradients += weight * lv.gradients;
      out.total += weight * lv.value;
      return lv.value;
    }
    try {
      return eval().value;
    } catch (const Error&) {
      return nan;
    }
  };

  out.chamfer = fold(weights.chamfer,
                     [&] { return chamfer_loss(output, bundle.mesh.V, corr); });
  out.quadric = fold(weights.quadric, [&] {
    return quadric_loss(output, bundle.vertex_quadrics, corr.out_to_in);
  });
  out.normal = fold(weights.normal, [&] {
    return normal_loss(output, bundle.mesh.V, bundle.vertex_normals,
                       bundle.one_ring, corr.out_to_in, normal_kind);
  });
  out.surface = fold(weights.surface, [&] {
    return surface_loss(output, bundle.mesh, bundle.vertex_faces,
                        corr.out_to_in);
  });
  return out;
}

/// Same, over correspondences freshly matched against the current output.
template <typename Scalar>
LossBreakdown<Scalar> combined_loss(const PointMatrix<Scalar>& output,
                                    const InputBundle<Scalar>& bundle,
                                    const LossWeights<Scalar>& weights,
                                    NormalLossKind normal_kind = NormalLossKind::Squared) {
  if (output.rows() == 0) throw EmptyInput("combined loss over an empty output cloud");
  CorrespondenceMap corr;
  corr.out_to_in = bundle.vertex_index->nearest_all(output);
  corr.in_to_out = KdTree<Scalar>(output).nearest_all(bundle.mesh.V);
  return combined_loss(output, bundle, weights, corr, normal_kind);
}

}  // namespace qgeom
