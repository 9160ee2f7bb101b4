#include <doctest.h>

#include <cmath>
#include <vector>

#include "qgeom/fit.h"
#include "qgeom/losses.h"
#include "qgeom/rng.h"
#include "support/shapes.h"

using qgeom::FitConfigd;
using qgeom::Index;
using qgeom::InitKind;
using qgeom::PointMatrixd;

namespace {

bool traces_identical(const qgeom::FitTraced& a, const qgeom::FitTraced& b) {
  if (a.records.size() != b.records.size()) return false;
  for (size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.step != rb.step || ra.lr != rb.lr || ra.total != rb.total ||
        ra.chamfer != rb.chamfer || ra.quadric != rb.quadric ||
        ra.normal != rb.normal || ra.surface != rb.surface)
      return false;
  }
  return (a.final_points.rows() == b.final_points.rows()) &&
         (a.final_points.array() == b.final_points.array()).all();
}

}  // namespace

TEST_SUITE("fit_optimizer") {

TEST_CASE("default learning rates depend on whether quadric loss is active") {
  const auto chamfer_only = qgeom::default_config<double>({.chamfer = 1.0});
  CHECK(chamfer_only.learning_rate == 1e-3);
  const auto with_quadric =
      qgeom::default_config<double>({.chamfer = 1.0, .quadric = 1.0});
  CHECK(with_quadric.learning_rate == 1e-4);
  const auto surface_only = qgeom::default_config<double>({.surface = 1.0});
  CHECK(surface_only.learning_rate == 1e-3);

  for (const auto& config : {chamfer_only, with_quadric, surface_only}) {
    CHECK(config.lr_decay_factor == 0.8);
    CHECK(config.lr_decay_every == 100);
    CHECK(config.adam_beta1 == 0.9);
    CHECK(config.adam_beta2 == 0.999);
    CHECK(config.adam_epsilon == 1e-8);
    CHECK(config.steps == 1000);
  }
}

TEST_CASE("config validation rejects out-of-range settings") {
  const FitConfigd good = qgeom::default_config<double>({.quadric = 1.0});
  CHECK_NOTHROW(qgeom::validate_config(good));

  FitConfigd bad = good;
  bad.steps = 0;
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
  bad = good;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
  bad = good;
  bad.lr_decay_factor = 0.0;
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
  bad = good;
  bad.lr_decay_factor = 1.5;
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
  bad = good;
  bad.adam_beta1 = 1.0;
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
  bad = good;
  bad.weights = {};
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
  bad = good;
  bad.point_count = 0;
  CHECK_THROWS_AS(qgeom::validate_config(bad), qgeom::Error);
}

TEST_CASE("starting at the vertices is a fixed point of a quadric-only fit") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.quadric = 1.0});
  config.steps = 200;
  config.init = InitKind::Given;
  const auto trace = qgeom::fit_points(bundle, config, mesh.V);
  REQUIRE(trace.records.size() == 200);
  for (const auto& rec : trace.records) CHECK(rec.total < 1e-7);
  CHECK((trace.final_points - mesh.V).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero-loss starts stay put on a planar grid too") {
  const auto mesh = shapes::make_grid(5, 5);
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.quadric = 1.0});
  config.steps = 300;
  config.init = InitKind::Given;
  const auto trace = qgeom::fit_points(bundle, config, mesh.V);
  CHECK((trace.final_points - mesh.V).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("chamfer-only descent halves the initial loss on a cube") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.point_count = 64;
  config.jitter_sigma = 0.05;
  config.seed = 42;
  const auto trace = qgeom::fit_points(bundle, config);
  REQUIRE(trace.records.size() == 1000);
  const double initial = trace.records.front().chamfer;
  const double final_loss = trace.records.back().chamfer;
  CHECK(initial > 0.0);
  CHECK(final_loss < 0.5 * initial);
}

TEST_CASE("quadric-only descent flattens a jittered grid cloud") {
  const auto mesh = shapes::make_grid(10, 10);
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.quadric = 1.0});
  config.point_count = mesh.vertex_count();
  config.jitter_sigma = 0.01;
  config.seed = 42;
  const auto trace = qgeom::fit_points(bundle, config);
  CHECK(trace.records.back().quadric < 1e-5);
  // the plane is z=0: only the normal-direction residual is constrained
  const double rms_z = std::sqrt(trace.final_points.col(2).array().square().mean());
  CHECK(rms_z < 1e-3);
  // in-plane coordinates were free to drift; the fit must not have collapsed
  CHECK(trace.final_points.col(0).maxCoeff() > 0.5);
}

TEST_CASE("the learning-rate schedule decays every hundred steps") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.steps = 250;
  config.point_count = 16;
  const auto trace = qgeom::fit_points(bundle, config);
  REQUIRE(trace.records.size() == 250);
  for (Index i = 0; i < 250; ++i) CHECK(trace.records[i].step == i);
  CHECK(trace.records[0].lr == 1e-3);
  CHECK(trace.records[99].lr == 1e-3);
  CHECK(trace.records[100].lr == doctest::Approx(0.8e-3).epsilon(1e-15));
  CHECK(trace.records[199].lr == doctest::Approx(0.8e-3).epsilon(1e-15));
  CHECK(trace.records[200].lr == doctest::Approx(0.64e-3).epsilon(1e-15));
}

TEST_CASE("a unit decay interval decays before every step after the first") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.steps = 4;
  config.point_count = 8;
  config.lr_decay_every = 1;
  config.lr_decay_factor = 0.5;
  const auto trace = qgeom::fit_points(bundle, config);
  CHECK(trace.records[0].lr == 1e-3);
  CHECK(trace.records[1].lr == 0.5e-3);
  CHECK(trace.records[2].lr == 0.25e-3);
  CHECK(trace.records[3].lr == 0.125e-3);
}

TEST_CASE("identical configurations produce bit-identical traces") {
  const auto mesh = shapes::make_icosphere(1);
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config =
      qgeom::default_config<double>({.chamfer = 1.0, .quadric = 1.0});
  config.steps = 40;
  config.point_count = 30;
  config.seed = 7;
  const auto a = qgeom::fit_points(bundle, config);
  const auto b = qgeom::fit_points(bundle, config);
  CHECK(traces_identical(a, b));

  // a rebuilt bundle must not change anything either
  const auto bundle2 = qgeom::make_input_bundle(mesh);
  const auto c = qgeom::fit_points(bundle2, config);
  CHECK(traces_identical(a, c));
}

TEST_CASE("different seeds move the initialization") {
  const auto mesh = shapes::make_icosphere(1);
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.steps = 5;
  config.point_count = 20;
  config.seed = 1;
  const auto a = qgeom::fit_points(bundle, config);
  config.seed = 2;
  const auto b = qgeom::fit_points(bundle, config);
  CHECK_FALSE(traces_identical(a, b));
}

TEST_CASE("exploding steps abort with the offending component and step") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.quadric = 1.0});
  config.steps = 50;
  config.point_count = 8;
  config.learning_rate = 1e200;
  try {
    qgeom::fit_points(bundle, config);
    FAIL("expected NonFiniteLoss");
  } catch (const qgeom::NonFiniteLoss& e) {
    CHECK(e.step > 0);
    CHECK(e.step < 5);
    CHECK(e.component == "quadric");
    CHECK(std::string(e.what()).find("quadric") != std::string::npos);
  }
}

TEST_CASE("the step callback sees every record, including before an abort") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.steps = 30;
  config.point_count = 12;
  std::vector<qgeom::StepRecord<double>> seen;
  const auto trace = qgeom::fit_points<double>(
      bundle, config, {}, [&](const qgeom::StepRecord<double>& r) {
        seen.push_back(r);
      });
  REQUIRE(seen.size() == trace.records.size());
  for (size_t i = 0; i < seen.size(); ++i) CHECK(seen[i].total == trace.records[i].total);

  seen.clear();
  config.weights = {.quadric = 1.0};
  config.learning_rate = 1e200;
  CHECK_THROWS_AS(qgeom::fit_points<double>(
                      bundle, config, {},
                      [&](const qgeom::StepRecord<double>& r) {
                        seen.push_back(r);
                      }),
                  qgeom::NonFiniteLoss);
  CHECK(seen.size() > 0);  // the partial trace survives the abort
}

TEST_CASE("jittered initialization cycles the vertex list") {
  const auto mesh = shapes::make_cube();
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.point_count = 19;
  config.jitter_sigma = 0.01;
  config.seed = 5;
  const PointMatrixd points = qgeom::initial_points(mesh, config);
  REQUIRE(points.rows() == 19);
  for (Index i = 0; i < points.rows(); ++i) {
    const double off = (points.row(i) - mesh.V.row(i % 8)).norm();
    CHECK(off < 0.1);
    CHECK(off > 0.0);
  }
  CHECK((qgeom::initial_points(mesh, config) - points).norm() == 0.0);
}

TEST_CASE("sphere initialization lands on the unit sphere") {
  const auto mesh = shapes::make_cube();
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.init = InitKind::UniformSphere;
  config.point_count = 200;
  const PointMatrixd points = qgeom::initial_points(mesh, config);
  for (Index i = 0; i < points.rows(); ++i)
    CHECK(points.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("init=Given refuses an empty starting cloud") {
  const auto mesh = shapes::make_cube();
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.chamfer = 1.0});
  config.init = InitKind::Given;
  CHECK_THROWS_AS(qgeom::fit_points(bundle, config), qgeom::EmptyInput);
}

TEST_CASE("frozen correspondences keep the descent deterministic and sane") {
  const auto mesh = shapes::make_grid(6, 6);
  const auto bundle = qgeom::make_input_bundle(mesh);
  FitConfigd config = qgeom::default_config<double>({.quadric = 1.0});
  config.steps = 200;
  config.point_count = mesh.vertex_count();
  config.jitter_sigma = 0.01;
  config.freeze_correspondences = true;
  const auto a = qgeom::fit_points(bundle, config);
  const auto b = qgeom::fit_points(bundle, config);
  CHECK(traces_identical(a, b));
  CHECK(a.records.back().total < a.records.front().total);
}

}  // TEST_SUITE
