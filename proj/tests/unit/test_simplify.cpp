#include <doctest.h>

#include <cmath>
#include <vector>

#include "qgeom/metrics.h"
#include "qgeom/rng.h"
#include "qgeom/simplify.h"
#include "support/oracles.h"
#include "support/shapes.h"

using qgeom::Index;
using qgeom::Planed;
using qgeom::Quadricd;
using qgeom::TriangleMeshd;
using Vec3d = qgeom::Vec3<double>;

namespace {

Planed plane_through(const Vec3d& point, const Vec3d& unit_normal) {
  return {unit_normal, -unit_normal.dot(point)};
}

Vec3d random_unit(qgeom::Rng& rng) {
  while (true) {
    const Vec3d v(rng.normal(), rng.normal(), rng.normal());
    const double len = v.norm();
    if (len > 1e-6) return v / len;
  }
}

bool meshes_equal(const TriangleMeshd& a, const TriangleMeshd& b) {
  return a.V.rows() == b.V.rows() && a.F.rows() == b.F.rows() &&
         (a.V.array() == b.V.array()).all() &&
         (a.F.array() == b.F.array()).all();
}

bool contains_position(const TriangleMeshd& mesh, const Vec3d& p, double tol) {
  for (Index v = 0; v < mesh.vertex_count(); ++v)
    if ((mesh.V.row(v).transpose() - p).norm() < tol) return true;
  return false;
}

void check_faces_valid(const TriangleMeshd& mesh) {
  CHECK_NOTHROW(qgeom::validate_mesh(mesh));
  for (Index f = 0; f < mesh.face_count(); ++f) {
    const Index a = mesh.F(f, 0), b = mesh.F(f, 1), c = mesh.F(f, 2);
    CHECK(a >= 0);
    CHECK(a < mesh.vertex_count());
    CHECK(b >= 0);
    CHECK(b < mesh.vertex_count());
    CHECK(c >= 0);
    CHECK(c < mesh.vertex_count());
    CHECK(a != b);
    CHECK(b != c);
    CHECK(a != c);
    CHECK(qgeom::face_area(mesh, f) >= qgeom::kDegenerateFaceArea);
  }
}

}  // namespace

TEST_SUITE("simplify") {

TEST_CASE("placement solves three orthogonal planes to their intersection") {
  const Vec3d c(0.3, -0.7, 1.1);
  Quadricd q = Quadricd::from_plane(plane_through(c, Vec3d(1, 0, 0)));
  q += Quadricd::from_plane(plane_through(c, Vec3d(0, 1, 0)));
  q += Quadricd::from_plane(plane_through(c, Vec3d(0, 0, 1)));

  const auto placed = qgeom::optimal_placement(
      q, Vec3d(c + Vec3d(1, 1, 1)), Vec3d(c - Vec3d(2, 0.5, 1)));
  CHECK(placed.solved);
  CHECK((placed.position - c).norm() < 1e-9);
  CHECK(placed.cost < 1e-12);
  CHECK(placed.cost > -1e-12);
}

TEST_CASE("placement on a single plane falls back to the cheapest candidate") {
  const Quadricd q = Quadricd::from_plane(Planed{Vec3d(0, 0, 1), 0.0});

  SUBCASE("midpoint wins") {
    const auto placed =
        qgeom::optimal_placement(q, Vec3d(0, 0, 2), Vec3d(1, 1, -1));
    CHECK_FALSE(placed.solved);
    CHECK((placed.position - Vec3d(0.5, 0.5, 0.5)).norm() < 1e-12);
    CHECK(placed.cost == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("endpoint wins") {
    const auto placed =
        qgeom::optimal_placement(q, Vec3d(0, 0, 0.1), Vec3d(0, 0, 3));
    CHECK_FALSE(placed.solved);
    CHECK((placed.position - Vec3d(0, 0, 0.1)).norm() < 1e-12);
    CHECK(placed.cost == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("earlier candidate keeps ties") {
    const auto placed =
        qgeom::optimal_placement(q, Vec3d(0, 0, 1), Vec3d(2, 0, 1));
    CHECK_FALSE(placed.solved);
    CHECK((placed.position - Vec3d(0, 0, 1)).norm() == 0.0);
    CHECK(placed.cost == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("every fallback candidate cost matches the plane distance") {
    const Vec3d a(0.4, -2.0, 1.5), b(-1.0, 3.0, -0.5);
    const auto placed = qgeom::optimal_placement(q, a, b);
    const double best = std::min(
        {q.eval(a), q.eval(b), q.eval((a + b) / 2.0)});
    CHECK(placed.cost == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("placement on random full-rank quadrics beats every grid sample") {
  qgeom::Rng rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3d c(rng.uniform() - 0.5, rng.uniform() - 0.5,
                  rng.uniform() - 0.5);
    Quadricd q;
    for (int k = 0; k < 5; ++k) {
      const Vec3d anchor = c + 0.3 * Vec3d(rng.normal(), rng.normal(),
                                           rng.normal());
      q += Quadricd::from_plane(plane_through(anchor, random_unit(rng)));
    }
    const auto placed = qgeom::optimal_placement(
        q, Vec3d(c + Vec3d(1, 0, 0)), Vec3d(c - Vec3d(0, 1, 0)));
    REQUIRE(placed.solved);
    CHECK(placed.cost >= -1e-9);
    CHECK(q.gradient(placed.position).norm() < 1e-8);

    const Vec3d half = Vec3d::Constant(0.25);
    const double grid_min = oracles::grid_min_cost(
        q, placed.position - half, placed.position + half, 20);
    CHECK(grid_min >= placed.cost - 1e-9);
    // five unit planes bound the largest eigenvalue by five, and the nearest
    // sample sits within half a cell of the optimum
    CHECK(grid_min - placed.cost <= 5.0 * 3.0 * 0.0125 * 0.0125 + 1e-9);
  }
}

TEST_CASE("meshes at or under the target come back unchanged") {
  const TriangleMeshd cube = shapes::make_cube();

  const auto at_target = qgeom::simplify_to(cube, 8);
  CHECK(meshes_equal(at_target.mesh, cube));
  CHECK(at_target.total_cost == 0.0);
  CHECK(at_target.reached_target);
  CHECK(at_target.collapses == 0);

  const auto under_target = qgeom::simplify_to(cube, 20);
  CHECK(meshes_equal(under_target.mesh, cube));
  CHECK(under_target.collapses == 0);
}

TEST_CASE("targets under four are rejected") {
  const TriangleMeshd cube = shapes::make_cube();
  CHECK_THROWS_AS((void)qgeom::simplify_to(cube, 3), qgeom::TargetTooSmall);
  CHECK_THROWS_AS((void)qgeom::simplify_to(cube, 0), qgeom::TargetTooSmall);
}

TEST_CASE("a flat grid collapses to its four corners with almost no error") {
  const TriangleMeshd grid = shapes::make_grid(10, 10);
  const auto res = qgeom::simplify_to(grid, 4);

  CHECK(res.reached_target);
  CHECK(res.mesh.vertex_count() == 4);
  CHECK(res.collapses == grid.vertex_count() - 4);
  CHECK(res.total_cost < 1e-9);
  check_faces_valid(res.mesh);

  for (const Vec3d& corner :
       {Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(0, 1, 0), Vec3d(1, 1, 0)})
    CHECK(contains_position(res.mesh, corner, 1e-6));
  for (Index v = 0; v < res.mesh.vertex_count(); ++v)
    CHECK(std::abs(res.mesh.V(v, 2)) < 1e-9);
  for (Index f = 0; f < res.mesh.face_count(); ++f)
    CHECK(qgeom::face_plane(res.mesh, f).normal.z() > 0.0);
}

TEST_CASE("a subdivided cube collapses back to its eight corners") {
  const TriangleMeshd dense = shapes::make_subdivided_cube(4);
  const auto res = qgeom::simplify_to(dense, 8);

  CHECK(res.reached_target);
  CHECK(res.mesh.vertex_count() == 8);
  CHECK(res.total_cost < 1e-9);
  check_faces_valid(res.mesh);
  for (double x : {0.0, 1.0})
    for (double y : {0.0, 1.0})
      for (double z : {0.0, 1.0})
        CHECK(contains_position(res.mesh, Vec3d(x, y, z), 1e-6));
}

TEST_CASE("simplified icosphere vertices stay near the original surface") {
  const TriangleMeshd orig = shapes::make_icosphere(3);
  REQUIRE(orig.vertex_count() == 642);

  const auto res = qgeom::simplify_to(orig, 100);
  CHECK(res.reached_target);
  CHECK(res.mesh.vertex_count() == 100);
  CHECK(res.collapses == 542);
  CHECK(res.total_cost > 0.0);
  check_faces_valid(res.mesh);

  const qgeom::TriangleDistanceIndex<double> index(orig);
  double worst = 0.0;
  for (Index v = 0; v < res.mesh.vertex_count(); ++v) {
    const Vec3d p = res.mesh.V.row(v);
    worst = std::max(worst, std::sqrt(index.nearest(p).sq_dist));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("total cost grows monotonically as the target shrinks") {
  const TriangleMeshd orig = shapes::make_icosphere(2);
  double previous = -1.0;
  for (const Index target : {150, 120, 90, 60, 30, 10}) {
    const auto res = qgeom::simplify_to(orig, target);
    CHECK(res.reached_target);
    CHECK(res.mesh.vertex_count() == target);
    CHECK(res.total_cost >= previous - 1e-12);
    previous = res.total_cost;
  }
}

TEST_CASE("boundary penalties keep an open grid inside its footprint") {
  const TriangleMeshd grid = shapes::make_grid(8, 8);
  const auto res = qgeom::simplify_to(grid, 25);

  CHECK(res.reached_target);
  check_faces_valid(res.mesh);
  CHECK(res.mesh.V.col(0).minCoeff() > -1e-9);
  CHECK(res.mesh.V.col(0).maxCoeff() < 1.0 + 1e-9);
  CHECK(res.mesh.V.col(1).minCoeff() > -1e-9);
  CHECK(res.mesh.V.col(1).maxCoeff() < 1.0 + 1e-9);
  for (Index v = 0; v < res.mesh.vertex_count(); ++v)
    CHECK(std::abs(res.mesh.V(v, 2)) < 1e-9);
  for (Index f = 0; f < res.mesh.face_count(); ++f)
    CHECK(qgeom::face_plane(res.mesh, f).normal.z() > 0.0);
}

TEST_CASE("curved and perturbed meshes simplify to valid geometry") {
  const std::vector<std::pair<TriangleMeshd, Index>> jobs = {
      {shapes::make_icosphere(2), 40},
      {shapes::make_cylinder(), 30},
      {shapes::make_perturbed(shapes::make_icosphere(2), 5), 50},
  };
  for (const auto& [mesh, target] : jobs) {
    const auto res = qgeom::simplify_to(mesh, target);
    CHECK(res.mesh.vertex_count() <= mesh.vertex_count());
    if (res.reached_target) CHECK(res.mesh.vertex_count() == target);
    CHECK(res.collapses == mesh.vertex_count() - res.mesh.vertex_count());
    check_faces_valid(res.mesh);
  }
}

TEST_CASE("repeat runs are identical") {
  const TriangleMeshd orig = shapes::make_icosphere(2);
  const auto first = qgeom::simplify_to(orig, 60);
  const auto second = qgeom::simplify_to(orig, 60);
  CHECK(meshes_equal(first.mesh, second.mesh));
  CHECK(first.total_cost == second.total_cost);
  CHECK(first.collapses == second.collapses);
}

}  // TEST_SUITE
