#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgeom/fit.h"
#include "qgeom/losses.h"
#include "qgeom/mesh_io.h"
#include "qgeom/mesh_ops.h"
#include "qgeom/metrics.h"
#include "qgeom/quadric.h"
#include "qgeom/simplify.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

const std::map<std::string, qgeom::LossWeights<double>>& presets() {
  static const std::map<std::string, qgeom::LossWeights<double>> table = {
      {"chamfer", {1, 0, 0, 0}},
      {"quadric", {0, 1, 0, 0}},
      {"normal", {0, 0, 1, 0}},
      {"surface", {0, 0, 0, 1}},
      {"chamfer+quadric", {1, 1, 0, 0}},
      {"chamfer+normal", {1, 0, 1, 0}},
      {"chamfer+surface", {1, 0, 0, 1}},
  };
  return table;
}

std::string init_name(qgeom::InitKind k) {
  switch (k) {
    case qgeom::InitKind::JitteredVertices: return "jittered_vertices";
    case qgeom::InitKind::UniformSphere: return "uniform_sphere";
    default: return "given";
  }
}

qgeom::InitKind init_from_name(const std::string& name) {
  if (name == "jittered_vertices") return qgeom::InitKind::JitteredVertices;
  if (name == "uniform_sphere") return qgeom::InitKind::UniformSphere;
  throw qgeom::Error("unknown init kind '" + name + "'");
}

json config_to_json(const qgeom::FitConfigd& c) {
  json j;
  j["weights"] = {{"chamfer", c.weights.chamfer},
                  {"quadric", c.weights.quadric},
                  {"normal", c.weights.normal},
                  {"surface", c.weights.surface}};
  j["steps"] = c.steps;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["lr_decay_every"] = c.lr_decay_every;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["init"] = init_name(c.init);
  j["jitter_sigma"] = c.jitter_sigma;
  j["point_count"] = c.point_count;
  j["seed"] = c.seed;
  j["normal_loss"] =
      c.normal_kind == qgeom::NormalLossKind::Squared ? "squared" : "absolute";
  return j;
}

qgeom::FitConfigd config_from_json(const json& j) {
  qgeom::FitConfigd c;
  const auto& w = j.at("weights");
  c.weights = {w.at("chamfer").get<double>(), w.at("quadric").get<double>(),
               w.at("normal").get<double>(), w.at("surface").get<double>()};
  c.steps = j.at("steps").get<long>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
  c.lr_decay_every = j.at("lr_decay_every").get<long>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  c.init = init_from_name(j.at("init").get<std::string>());
  c.jitter_sigma = j.at("jitter_sigma").get<double>();
  c.point_count = j.at("point_count").get<long>();
  c.seed = j.at("seed").get<unsigned long long>();
  c.normal_kind = j.at("normal_loss").get<std::string>() == "absolute"
                      ? qgeom::NormalLossKind::Absolute
                      : qgeom::NormalLossKind::Squared;
  return c;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw qgeom::IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw qgeom::IoError("write failed for '" + path.string() + "'");
}

std::string trace_csv(const std::vector<qgeom::StepRecord<double>>& records) {
  std::string csv = "step,lr,total,chamfer,quadric,normal,surface\n";
  for (const auto& r : records) {
    csv += std::to_string(r.step);
    for (const double v : {r.lr, r.total, r.chamfer, r.quadric, r.normal, r.surface})
      csv += "," + fmt9(v);
    csv += "\n";
  }
  return csv;
}

json eval_to_json(const qgeom::EvalReportd& report) {
  json j;
  j["cd_times_1e3"] = report.cd_times_1e3;
  j["metro_max_times_10"] = report.metro_max_times_10;
  j["metro_median_times_10"] = report.metro_median_times_10;
  j["sample_count"] = report.sample_count;
  j["seed"] = report.seed;
  j["metro_variant"] = "point-to-surface";
  return j;
}

/// Shared by `fit` and `replay`: runs the optimization and writes the
/// artifact set (cloud.xyz, trace.csv, loss.json, eval.json, manifest.json).
/// On a non-finite loss the partial trace is still written before the error
/// propagates to the exit-code mapping.
int run_fit(const std::string& mesh_path, const qgeom::FitConfigd& config,
            const std::string& preset_name, const fs::path& out_dir) {
  const auto mesh = qgeom::load_mesh(mesh_path);
  const auto bundle = qgeom::make_input_bundle(mesh);
  fs::create_directories(out_dir);

  std::vector<qgeom::StepRecord<double>> partial;
  partial.reserve(config.steps);
  qgeom::FitTraced trace;
  try {
    trace = qgeom::fit_points<double>(
        bundle, config, {},
        [&](const qgeom::StepRecord<double>& r) { partial.push_back(r); });
  } catch (const qgeom::NonFiniteLoss&) {
    write_text(out_dir / "trace.csv", trace_csv(partial));
    throw;
  }

  qgeom::save_points(trace.final_points, (out_dir / "cloud.xyz").string());
  write_text(out_dir / "trace.csv", trace_csv(trace.records));

  const auto& last = trace.records.back();
  json loss_json;
  loss_json["loss_name"] = "combined";
  loss_json["scalar"] = last.total;
  loss_json["components"] = {{"chamfer", last.chamfer},
                             {"quadric", last.quadric},
                             {"normal", last.normal},
                             {"surface", last.surface}};
  write_text(out_dir / "loss.json", loss_json.dump(2) + "\n");

  const auto report = qgeom::evaluate(trace.final_points, mesh, config.seed);
  write_text(out_dir / "eval.json", eval_to_json(report).dump(2) + "\n");

  json manifest;
  manifest["tool"] = "qgeom";
  manifest["version"] = kVersion;
  manifest["command"] = "fit";
  manifest["mesh"] = mesh_path;
  manifest["preset"] = preset_name;
  manifest["config"] = config_to_json(config);
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "fit: " << trace.records.size() << " steps, final total loss "
            << fmt9(last.total) << ", artifacts in " << out_dir.string()
            << "\n";
  return 0;
}

int run_prepare(const std::string& in_path, const fs::path& out_dir,
                long target_vertices, bool split, bool normalize,
                bool simplify_first) {
  const auto mesh = qgeom::load_mesh(in_path);
  fs::create_directories(out_dir);
  const std::string stem = fs::path(in_path).stem().string();

  auto simplify_step = [&](const qgeom::TriangleMeshd& m) {
    const auto result = qgeom::simplify_to(m, target_vertices);
    if (!result.reached_target)
      std::cerr << "note: simplification stopped early at "
                << result.mesh.vertex_count() << " vertices\n";
    return result.mesh;
  };

  std::vector<qgeom::TriangleMeshd> components;
  if (simplify_first) {
    const auto reduced = simplify_step(mesh);
    components = split ? qgeom::connected_components(reduced)
                       : std::vector<qgeom::TriangleMeshd>{reduced};
  } else {
    components = split ? qgeom::connected_components(mesh)
                       : std::vector<qgeom::TriangleMeshd>{mesh};
    for (auto& comp : components) comp = simplify_step(comp);
  }
  if (components.empty()) throw qgeom::EmptyInput("mesh has no faces");

  for (size_t k = 0; k < components.size(); ++k) {
    qgeom::TriangleMeshd out = components[k];
    if (normalize) out = std::get<0>(qgeom::normalize_unit_sphere(out));
    const fs::path path = out_dir / (stem + "_c" + std::to_string(k) + ".off");
    qgeom::save_mesh(out, path.string());
    std::cout << "component " << k << ": " << out.vertex_count()
              << " vertices, " << out.face_count() << " faces -> "
              << path.string() << "\n";
  }
  return 0;
}

int run_eval(const std::string& cloud_path, const std::string& mesh_path,
             long samples, unsigned long long seed, bool csv) {
  const auto mesh = qgeom::load_mesh(mesh_path);
  const std::string ext = cloud_path.substr(cloud_path.find_last_of('.') + 1);
  qgeom::PointMatrixd cloud;
  if (ext == "obj" || ext == "off") {
    // a mesh as the first input gets sampled down to `samples` points
    cloud = qgeom::sample_surface(qgeom::load_mesh(cloud_path), samples, seed);
  } else {
    const auto loaded = qgeom::load_points(cloud_path);
    cloud = loaded;
  }
  const auto report = qgeom::evaluate(cloud, mesh, seed);
  if (csv) {
    std::cout << "cd_x1e3,metro_max_x10,metro_median_x10,samples,seed\n"
              << fmt9(report.cd_times_1e3) << ","
              << fmt9(report.metro_max_times_10) << ","
              << fmt9(report.metro_median_times_10) << ","
              << report.sample_count << "," << report.seed << "\n";
  } else {
    std::cout << eval_to_json(report).dump(2) << "\n";
  }
  return 0;
}

int run_quadrics(const std::string& mesh_path, const std::string& out_csv) {
  const auto mesh = qgeom::load_mesh(mesh_path);
  const auto acc = qgeom::accumulate_vertex_quadrics(mesh);
  for (const qgeom::Index v : acc.isolated_vertices)
    std::cerr << "note: vertex " << v << " has no usable incident face\n";
  std::string csv;
  for (const auto& q : acc.quadrics) {
    for (int i = 0; i < 10; ++i) {
      if (i) csv += ",";
      csv += fmt9(q.q[i]);
    }
    csv += "\n";
  }
  write_text(out_csv, csv);
  std::cout << "wrote " << acc.quadrics.size() << " quadrics to " << out_csv
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric losses and mesh fitting toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "Split, simplify, and normalize a mesh for fitting");
  std::string prep_in, prep_out = "prepared";
  long prep_target = 2500;
  bool prep_no_split = false, prep_no_normalize = false, prep_simplify_first = false;
  prepare->add_option("mesh", prep_in, "input mesh (OBJ/OFF/PLY)")->required();
  prepare->add_option("--out", prep_out, "output directory");
  prepare->add_option("--target-vertices", prep_target, "simplification target")
      ->check(CLI::PositiveNumber);
  prepare->add_flag("--no-split", prep_no_split, "keep components together");
  prepare->add_flag("--no-normalize", prep_no_normalize, "skip unit-sphere normalization");
  prepare->add_flag("--simplify-first", prep_simplify_first,
                    "simplify before splitting components");

  // fit
  auto* fit = app.add_subcommand("fit", "Optimize a point cloud against a mesh");
  std::string fit_mesh, fit_out = "qgeom_out", fit_preset;
  double lw_chamfer = 0, lw_quadric = 0, lw_normal = 0, lw_surface = 0;
  long fit_steps = 1000, fit_decay_every = 100, fit_points_n = 2500;
  double fit_lr = 0, fit_decay = 0.8, fit_jitter = 0.05;
  unsigned long long fit_seed = 42;
  std::string fit_init = "jittered_vertices", fit_normal_kind = "squared";
  fit->add_option("mesh", fit_mesh, "prepared mesh")->required();
  fit->add_option("--out", fit_out, "output directory");
  fit->add_option("--preset", fit_preset, "loss preset")
      ->check(CLI::IsMember({"chamfer", "quadric", "normal", "surface",
                             "chamfer+quadric", "chamfer+normal",
                             "chamfer+surface"}));
  auto* opt_lc = fit->add_option("--loss-chamfer", lw_chamfer, "chamfer weight");
  auto* opt_lq = fit->add_option("--loss-quadric", lw_quadric, "quadric weight");
  auto* opt_ln = fit->add_option("--loss-normal", lw_normal, "normal weight");
  auto* opt_ls = fit->add_option("--loss-surface", lw_surface, "surface weight");
  fit->add_option("--steps", fit_steps, "optimizer steps")->check(CLI::PositiveNumber);
  fit->add_option("--lr", fit_lr, "learning rate (default per loss kind)");
  fit->add_option("--lr-decay", fit_decay, "decay factor");
  fit->add_option("--lr-decay-every", fit_decay_every, "steps between decays")
      ->check(CLI::PositiveNumber);
  fit->add_option("--seed", fit_seed, "RNG seed");
  fit->add_option("--points", fit_points_n, "output cloud size")
      ->check(CLI::PositiveNumber);
  fit->add_option("--jitter", fit_jitter, "init jitter sigma");
  fit->add_option("--init", fit_init, "initialization")
      ->check(CLI::IsMember({"jittered_vertices", "uniform_sphere"}));
  fit->add_option("--normal-loss", fit_normal_kind, "normal loss form")
      ->check(CLI::IsMember({"squared", "absolute"}));

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a cloud (or mesh) against a mesh");
  std::string eval_cloud, eval_mesh;
  long eval_samples = 100000;
  unsigned long long eval_seed = 42;
  bool eval_csv = false;
  eval->add_option("cloud", eval_cloud, "point cloud (XYZ/PLY) or mesh to sample")
      ->required();
  eval->add_option("mesh", eval_mesh, "reference mesh")->required();
  eval->add_option("--samples", eval_samples, "sample count for mesh inputs");
  eval->add_option("--seed", eval_seed, "sampling seed");
  eval->add_flag("--csv", eval_csv, "one-row CSV instead of JSON");

  // quadrics
  auto* quad = app.add_subcommand("quadrics", "Dump per-vertex quadric coefficients");
  std::string quad_mesh, quad_out = "quadrics.csv";
  quad->add_option("mesh", quad_mesh, "input mesh")->required();
  quad->add_option("out", quad_out, "output CSV path");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-run a fit from its manifest");
  std::string replay_manifest, replay_out;
  replay->add_option("manifest", replay_manifest, "manifest.json from a fit run")
      ->required();
  replay->add_option("--out", replay_out,
                     "output directory (default: the manifest's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (prepare->parsed())
      return run_prepare(prep_in, prep_out, prep_target, !prep_no_split,
                         !prep_no_normalize, prep_simplify_first);

    if (fit->parsed()) {
      qgeom::LossWeights<double> weights;
      if (!fit_preset.empty()) weights = presets().at(fit_preset);
      if (opt_lc->count()) weights.chamfer = lw_chamfer;
      if (opt_lq->count()) weights.quadric = lw_quadric;
      if (opt_ln->count()) weights.normal = lw_normal;
      if (opt_ls->count()) weights.surface = lw_surface;
      if (!weights.any_enabled()) {
        std::cerr << "error: select a --preset or at least one positive --loss-* weight\n";
        return 2;
      }
      qgeom::FitConfigd config = qgeom::default_config(weights);
      config.steps = fit_steps;
      if (fit_lr > 0) config.learning_rate = fit_lr;
      config.lr_decay_factor = fit_decay;
      config.lr_decay_every = fit_decay_every;
      config.seed = fit_seed;
      config.point_count = fit_points_n;
      config.jitter_sigma = fit_jitter;
      config.init = init_from_name(fit_init);
      config.normal_kind = fit_normal_kind == "absolute"
                               ? qgeom::NormalLossKind::Absolute
                               : qgeom::NormalLossKind::Squared;
      return run_fit(fit_mesh, config, fit_preset, fit_out);
    }

    if (eval->parsed()) {
      if (eval_samples <= 0) {
        std::cerr << "error: --samples must be positive\n";
        return 2;
      }
      return run_eval(eval_cloud, eval_mesh, eval_samples, eval_seed, eval_csv);
    }

    if (quad->parsed()) return run_quadrics(quad_mesh, quad_out);

    if (replay->parsed()) {
      std::ifstream in(replay_manifest);
      if (!in) throw qgeom::IoError("cannot open '" + replay_manifest + "'");
      json manifest = json::parse(in);
      if (manifest.value("command", "") != "fit")
        throw qgeom::Error("manifest does not describe a fit run");
      const auto config = config_from_json(manifest.at("config"));
      const std::string mesh_path = manifest.at("mesh").get<std::string>();
      const std::string preset_name = manifest.value("preset", "");
      const fs::path out_dir = replay_out.empty()
                                   ? fs::path(replay_manifest).parent_path()
                                   : fs::path(replay_out);
      return run_fit(mesh_path, config, preset_name,
                     out_dir.empty() ? fs::path(".") : out_dir);
    }
  } catch (const qgeom::NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const qgeom::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
