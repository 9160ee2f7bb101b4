#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qgeom/losses.h"
#include "qgeom/rng.h"
#include "qgeom/types.h"

namespace qgeom {

enum class InitKind { JitteredVertices, UniformSphere, Given };

template <typename Scalar>
struct FitConfig {
  LossWeights<Scalar> weights;
  Index steps = 1000;
  Scalar learning_rate = Scalar(1e-3);
  Scalar lr_decay_factor = Scalar(0.8);
  Index lr_decay_every = 100;
  Scalar adam_beta1 = Scalar(0.9);
  Scalar adam_beta2 = Scalar(0.999);
  Scalar adam_epsilon = Scalar(1e-8);
  InitKind init = InitKind::JitteredVertices;
  Scalar jitter_sigma = Scalar(0.05);
  Index point_count = 2500;
  unsigned long long seed = 42;
  NormalLossKind normal_kind = NormalLossKind::Squared;
  /// Debug switch for gradient checks: match once at initialization instead
  /// of before every step.
  bool freeze_correspondences = false;
};

using FitConfigd = FitConfig<double>;

template <typename Scalar>
struct StepRecord {
  Index step;
  Scalar lr;
  Scalar total;
  Scalar chamfer;
  Scalar quadric;
  Scalar normal;
  Scalar surface;
};

template <typename Scalar>
struct FitTrace {
  std::vector<StepRecord<Scalar>> records;
  PointMatrix<Scalar> final_points;
};

using FitTraced = FitTrace<double>;

/// Learning rates from the reference training protocol: plain descent runs
/// at 1e-3, but any configuration involving the quadric loss needs the
/// slower 1e-4 to stay stable.
template <typename Scalar>
FitConfig<Scalar> default_config(const LossWeights<Scalar>& weights) {
  FitConfig<Scalar> config;
  config.weights = weights;
  config.learning_rate = weights.quadric > 0 ? Scalar(1e-4) : Scalar(1e-3);
  return config;
}

template <typename Scalar>
void validate_config(const FitConfig<Scalar>& config) {
  if (!config.weights.any_enabled())
    throw Error("at least one loss weight must be positive");
  if (config.steps < 1) throw Error("steps must be >= 1");
  if (!(config.learning_rate > 0)) throw Error("learning rate must be positive");
  if (!(config.lr_decay_factor > 0 && config.lr_decay_factor <= 1))
    throw Error("lr decay factor must lie in (0, 1]");
  if (config.lr_decay_every < 1) throw Error("lr decay interval must be >= 1");
  if (!(config.adam_beta1 > 0 && config.adam_beta1 < 1) ||
      !(config.adam_beta2 > 0 && config.adam_beta2 < 1))
    throw Error("Adam betas must lie in (0, 1)");
  if (config.point_count < 1) throw Error("point count must be >= 1");
}

/// Initial output cloud: target vertices plus Gaussian jitter (cycling when
/// the cloud is larger than the vertex set), or points drawn uniformly on
/// the unit sphere.
template <typename Scalar>
PointMatrix<Scalar> initial_points(const TriangleMesh<Scalar>& mesh,
                                   const FitConfig<Scalar>& config) {
  Rng rng(config.seed);
  PointMatrix<Scalar> points(config.point_count, 3);
  if (config.init == InitKind::JitteredVertices) {
    const Index nv = mesh.vertex_count();
    if (nv == 0) throw EmptyInput("jittered init needs mesh vertices");
    for (Index i = 0; i < config.point_count; ++i)
      for (int k = 0; k < 3; ++k)
        points(i, k) = mesh.V(i % nv, k) +
                       config.jitter_sigma * static_cast<Scalar>(rng.normal());
  } else if (config.init == InitKind::UniformSphere) {
    for (Index i = 0; i < config.point_count; ++i) {
      Vec3<Scalar> dir;
      do {
        dir = Vec3<Scalar>(static_cast<Scalar>(rng.normal()),
                           static_cast<Scalar>(rng.normal()),
                           static_cast<Scalar>(rng.normal()));
      } while (dir.norm() < Scalar(1e-12));
      points.row(i) = (dir / dir.norm()).transpose();
    }
  } else {
    throw Error("initial_points called with init=Given");
  }
  return points;
}

namespace detail {

template <typename Scalar>
void check_finite(const LossBreakdown<Scalar>& loss,
                  const LossWeights<Scalar>& weights, Index step) {
  auto bad = [](Scalar v) { return !std::isfinite(v); };
  if (weights.chamfer > 0 && bad(loss.chamfer)) throw NonFiniteLoss(step, "chamfer");
  if (weights.quadric > 0 && bad(loss.quadric)) throw NonFiniteLoss(step, "quadric");
  if (weights.normal > 0 && bad(loss.normal)) throw NonFiniteLoss(step, "normal");
  if (weights.surface > 0 && bad(loss.surface)) throw NonFiniteLoss(step, "surface");
  if (bad(loss.total) || !loss.gradients.allFinite())
    throw NonFiniteLoss(step, "total");
}

}  // namespace detail

/// Adam descent directly on the point coordinates. Each step re-matches
/// correspondences against the current cloud, evaluates the weighted loss,
/// records a trace row, and applies a bias-corrected Adam update. The
/// learning rate is multiplied by the decay factor every `lr_decay_every`
/// steps. Everything is a deterministic function of (bundle, config, init).
/// `on_step` (optional) observes each record as it is produced, so callers
/// keep the partial trace when a later step aborts with NonFiniteLoss.
template <typename Scalar>
FitTrace<Scalar> fit_points(
    const InputBundle<Scalar>& bundle, const FitConfig<Scalar>& config,
    const PointMatrix<Scalar>& given_points = {},
    const std::function<void(const StepRecord<Scalar>&)>& on_step = {}) {
  validate_config(config);
  PointMatrix<Scalar> points;
  if (config.init == InitKind::Given) {
    if (given_points.rows() == 0)
      throw EmptyInput("init=Given requires a non-empty starting cloud");
    validate_cloud(given_points);
    points = given_points;
  } else {
    points = initial_points(bundle.mesh, config);
  }

  const Index n = points.rows();
  PointMatrix<Scalar> m = PointMatrix<Scalar>::Zero(n, 3);
  PointMatrix<Scalar> v = PointMatrix<Scalar>::Zero(n, 3);

  CorrespondenceMap frozen;
  if (config.freeze_correspondences) {
    frozen.out_to_in = bundle.vertex_index->nearest_all(points);
    frozen.in_to_out = KdTree<Scalar>(points).nearest_all(bundle.mesh.V);
  }

  FitTrace<Scalar> trace;
  trace.records.reserve(config.steps);
  Scalar lr = config.learning_rate;
  for (Index step = 0; step < config.steps; ++step) {
    if (step > 0 && step % config.lr_decay_every == 0)
      lr *= config.lr_decay_factor;

    const LossBreakdown<Scalar> loss =
        config.freeze_correspondences
            ? combined_loss(points, bundle, config.weights, frozen,
                            config.normal_kind)
            : combined_loss(points, bundle, config.weights, config.normal_kind);
    detail::check_finite(loss, config.weights, step);
    trace.records.push_back({step, lr, loss.total, loss.chamfer, loss.quadric,
                             loss.normal, loss.surface});
    if (on_step) on_step(trace.records.back());

    const Scalar t = static_cast<Scalar>(step + 1);
    const Scalar bias1 = Scalar(1) - std::pow(config.adam_beta1, t);
    const Scalar bias2 = Scalar(1) - std::pow(config.adam_beta2, t);
    m = config.adam_beta1 * m + (Scalar(1) - config.adam_beta1) * loss.gradients;
    v.array() = config.adam_beta2 * v.array() +
                (Scalar(1) - config.adam_beta2) * loss.gradients.array().square();
    points.array() -=
        lr * (m.array() / bias1) /
        ((v.array() / bias2).sqrt() + config.adam_epsilon);
  }
  trace.final_points = points;
  return trace;
}

}  // namespace qgeom
