// Command-line front end for the grasp exploration pipeline. One
// subcommand per workflow stage; all state between stages lives in the
// output directory as CSV datasets and JSON model files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "graspgen/dataset.hpp"
#include "graspgen/math_core.hpp"
#include "graspgen/objects.hpp"
#include "graspgen/pipeline.hpp"
#include "graspgen/run_config.hpp"
#include "graspgen/vae.hpp"

namespace fs = std::filesystem;
using namespace graspgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Cli {
  std::string config_path;
  std::string out_override;
  std::vector<std::string> object_override;

  // per-command extras
  std::string ingest_input;
  int stable_id = -1;  // -1 selects every stable pose where that makes sense
  double place_x = 0.0, place_y = 0.0, place_yaw = 0.0;
  std::string sweep_model = "qgg";
};

RunConfig resolve_config(const Cli& cli) {
  RunConfig cfg = cli.config_path.empty() ? RunConfig{} : load_run_config(cli.config_path);
  if (!cli.out_override.empty()) cfg.output_dir = cli.out_override;
  if (!cli.object_override.empty()) cfg.objects = cli.object_override;
  return cfg;
}

std::string dataset_path(const RunConfig& cfg, const std::string& object,
                         const char* kind) {
  return (fs::path(cfg.output_dir) / (object + "_" + kind + ".csv")).string();
}

std::string model_path(const RunConfig& cfg, const std::string& object, ModelKind kind) {
  return (fs::path(cfg.output_dir) / (object + "_" + model_kind_name(kind) + ".json"))
      .string();
}

std::string report_path(const RunConfig& cfg, const std::string& object,
                        const char* ext) {
  return (fs::path(cfg.output_dir) / (object + "_" + ext)).string();
}

const StablePose& stable_by_id(const SdfObject& obj, int id) {
  for (const StablePose& sp : obj.stable_poses) {
    if (sp.id == id) return sp;
  }
  throw std::invalid_argument("object " + obj.name + " has no stable pose " +
                              std::to_string(id));
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string stats_line(const StatsBlock& s) {
  std::ostringstream os;
  os << s.total << " records, " << s.successful << " successful";
  if (s.successful > 0) {
    os << "; quality median " << fmt9(*s.median) << " mean " << fmt9(*s.mean) << " max "
       << fmt9(*s.max);
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

PlannerParams planner_params(const RunConfig& cfg, double threshold) {
  PlannerParams params;
  params.threshold = threshold;
  params.workspace = cfg.workspace;
  return params;
}

int cmd_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  for (const std::string& name : selected_objects(cfg)) {
    const SdfObject obj = builtin_object(name);
    Rng rng(stage_seed(cfg, "primitives", name));
    GraspDataset ds = synth_primitives(obj, cfg.primitive_target, rng);
    const std::string path = dataset_path(cfg, name, "primitives");
    save_csv(ds, path);
    std::cout << name << ": " << ds.records.size() << " primitive grasps -> " << path
              << "\n";
  }
  return 0;
}

int cmd_ingest(const RunConfig& cfg, const Cli& cli) {
  const auto names = selected_objects(cfg);
  if (cli.ingest_input.empty()) {
    throw std::invalid_argument("ingest requires --input");
  }
  if (names.size() != 1) {
    throw std::invalid_argument("ingest requires exactly one --object");
  }
  const SdfObject obj = builtin_object(names[0]);
  GraspDataset ds = load_csv(cli.ingest_input, obj.name, Provenance::primitive);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (void)stable_by_id(obj, ds.records[i].stable_pose_id);
  }
  fs::create_directories(cfg.output_dir);
  const std::string path = dataset_path(cfg, obj.name, "primitives");
  save_csv(ds, path);
  std::cout << obj.name << ": ingested " << ds.records.size() << " grasps -> " << path
            << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, ModelKind kind) {
  fs::create_directories(cfg.output_dir);
  for (const std::string& name : selected_objects(cfg)) {
    const char* source = kind == ModelKind::hgg ? "primitives" : "extended";
    GraspDataset ds = load_csv(dataset_path(cfg, name, source), name,
                               kind == ModelKind::hgg ? Provenance::primitive
                                                      : Provenance::extended);
    TrainConfig tc = kind == ModelKind::hgg ? cfg.hgg : cfg.qgg;
    const char* stage = kind == ModelKind::hgg ? "train-hgg" : "train-qgg";
    tc.seed = stage_seed(cfg, stage, name);
    try {
      auto [model, history] = train(kind, ArchSpec{}, ds, tc);
      const std::string path = model_path(cfg, name, kind);
      save_model(model, path);
      std::cout << name << ": trained " << model_kind_name(kind) << " on "
                << ds.records.size() << " records, loss " << fmt9(history.front())
                << " -> " << fmt9(history.back()) << ", saved " << path << "\n";
    } catch (const std::runtime_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  }
  return 0;
}

int cmd_extend(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  for (const std::string& name : selected_objects(cfg)) {
    const SdfObject obj = builtin_object(name);
    GraspDataset prims =
        load_csv(dataset_path(cfg, name, "primitives"), name, Provenance::primitive);
    const VaeModel hgg = load_model(model_path(cfg, name, ModelKind::hgg), ModelKind::hgg);
    Rng rng(stage_seed(cfg, "extend", name));
    GraspDataset ext = extend_dataset(hgg, obj, prims, cfg.extend_per_stable,
                                      EvalParams{}, rng, cfg.workers, cfg.extend_noise);
    const std::string path = dataset_path(cfg, name, "extended");
    save_csv(ext, path);
    std::cout << name << ": extended to " << stats_line(dataset_stats(ext)) << " -> "
              << path << "\n";
  }
  return 0;
}

int cmd_plan(const RunConfig& cfg, const Cli& cli) {
  for (const std::string& name : selected_objects(cfg)) {
    const SdfObject obj = builtin_object(name);
    const VaeModel qgg = load_model(model_path(cfg, name, ModelKind::qgg), ModelKind::qgg);
    GraspDataset ext =
        load_csv(dataset_path(cfg, name, "extended"), name, Provenance::extended);
    const double threshold = pick_threshold(ext, cfg.threshold);
    const StablePose& sp =
        stable_by_id(obj, cli.stable_id < 0 ? obj.stable_poses.front().id : cli.stable_id);
    const Pose object_world = pose_compose(
        Pose{Vec3{cli.place_x, cli.place_y, 0.0},
             quat_from_axis_angle(Vec3{0, 0, 1}, cli.place_yaw)},
        sp.object_pose_on_table);
    Rng rng(stage_seed(cfg, "plan", name));
    const PlanResult r =
        plan_grasp(qgg, obj, sp, object_world, planner_params(cfg, threshold), rng);
    const GraspRecord& g = r.choice;
    std::cout << name << " stable pose " << sp.id << " (threshold " << fmt9(threshold)
              << "):\n"
              << "  grasp position " << fmt9(g.position.x) << " " << fmt9(g.position.y)
              << " " << fmt9(g.position.z) << "\n"
              << "  orientation " << fmt9(g.orientation.x) << " " << fmt9(g.orientation.y)
              << " " << fmt9(g.orientation.z) << " " << fmt9(g.orientation.w) << "\n"
              << "  spread " << fmt9(g.theta) << ", predicted quality "
              << fmt9(*g.quality) << "\n"
              << "  telemetry: " << r.telemetry.total_samples << " samples, "
              << r.telemetry.threshold_passes << " threshold passes, "
              << r.telemetry.line5_checks << " admissibility checks\n";
  }
  return 0;
}

int cmd_trials(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  for (const std::string& name : selected_objects(cfg)) {
    const SdfObject obj = builtin_object(name);
    const VaeModel qgg = load_model(model_path(cfg, name, ModelKind::qgg), ModelKind::qgg);
    GraspDataset ext =
        load_csv(dataset_path(cfg, name, "extended"), name, Provenance::extended);
    const double threshold = pick_threshold(ext, cfg.threshold);
    Rng rng(stage_seed(cfg, "trials", name));
    const TrialReport rep = run_trials(qgg, obj, ext, planner_params(cfg, threshold),
                                       cfg.poses_per_stable, EvalParams{}, rng);
    save_trial_report_csv(rep, report_path(cfg, name, "trials.csv"));
    const std::string text = format_trial_report(rep);
    write_text(report_path(cfg, name, "trials.txt"), text);
    std::cout << text;
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const Cli& cli) {
  fs::create_directories(cfg.output_dir);
  const ModelKind kind = cli.sweep_model == "hgg" ? ModelKind::hgg : ModelKind::qgg;
  for (const std::string& name : selected_objects(cfg)) {
    const SdfObject obj = builtin_object(name);
    const VaeModel model = load_model(model_path(cfg, name, kind), kind);
    GraspDataset prims;
    const std::string prim_path = dataset_path(cfg, name, "primitives");
    if (fs::exists(prim_path)) {
      prims = load_csv(prim_path, name, Provenance::primitive);
    }
    for (const StablePose& sp : obj.stable_poses) {
      if (cli.stable_id >= 0 && sp.id != cli.stable_id) continue;
      const SweepReport rep = latent_sweep_report(model, sp, cfg.sweep_points, prims);
      std::ostringstream file;
      file << name << "_sweep_" << model_kind_name(kind) << "_s" << sp.id << ".csv";
      const std::string path = (fs::path(cfg.output_dir) / file.str()).string();
      save_sweep_csv(rep, path);
      std::cout << name << ": stable pose " << sp.id << ", " << rep.rows.size()
                << " sweep rows + " << rep.primitive_overlay.size() << " overlay -> "
                << path << "\n";
    }
  }
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  for (const std::string& name : selected_objects(cfg)) {
    std::ostringstream os;
    os << "object: " << name << "\n";
    const std::string prim_path = dataset_path(cfg, name, "primitives");
    if (fs::exists(prim_path)) {
      const GraspDataset prims = load_csv(prim_path, name, Provenance::primitive);
      bool labeled = false;
      for (const GraspRecord& r : prims.records) labeled = labeled || r.quality.has_value();
      if (labeled) {
        os << "primitives: " << stats_line(dataset_stats(prims)) << "\n";
      } else {
        os << "primitives: " << prims.records.size() << " records, not yet evaluated\n";
      }
    }
    const std::string ext_path = dataset_path(cfg, name, "extended");
    if (fs::exists(ext_path)) {
      const GraspDataset ext = load_csv(ext_path, name, Provenance::extended);
      const StatsBlock stats = dataset_stats(ext);
      os << "extended: " << stats_line(stats) << "\n";
      if (stats.successful > 0) {
        os << "planning threshold: " << fmt9(pick_threshold(ext, cfg.threshold)) << "\n";
      }
    }
    const std::string trials_path = report_path(cfg, name, "trials.txt");
    if (fs::exists(trials_path)) {
      std::ifstream in(trials_path, std::ios::binary);
      os << in.rdbuf();
    }
    const std::string path = report_path(cfg, name, "report.txt");
    write_text(path, os.str());
    std::cout << os.str() << "written " << path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  CLI::App app{"grasp-space exploration pipeline"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--config", cli.config_path, "configuration file (key = value sections)");
  app.add_option("--out", cli.out_override, "output directory override");
  app.add_option("--object", cli.object_override,
                 "restrict to this object (repeatable; default: configured objects)");

  auto* synth = app.add_subcommand("synth-primitives",
                                   "generate validated primitive grasps per object");
  auto* ingest = app.add_subcommand("ingest", "import an external grasp CSV as primitives");
  ingest->add_option("--input", cli.ingest_input, "CSV file to import")->required();
  auto* train_hgg = app.add_subcommand("train-hgg", "train the grasp generator");
  auto* extend = app.add_subcommand("extend",
                                    "sample from the generator and label everything");
  auto* train_qgg =
      app.add_subcommand("train-qgg", "train the quality-aware generator");
  auto* plan = app.add_subcommand("plan", "plan one grasp at a given object placement");
  plan->add_option("--stable", cli.stable_id, "stable pose id (default: first)");
  plan->add_option("--x", cli.place_x, "object x placement [m]");
  plan->add_option("--y", cli.place_y, "object y placement [m]");
  plan->add_option("--yaw", cli.place_yaw, "object yaw placement [rad]");
  auto* trials = app.add_subcommand("trials", "run planning trial campaigns");
  auto* sweep = app.add_subcommand("sweep", "decode a latent sweep to CSV");
  sweep->add_option("--model", cli.sweep_model, "hgg or qgg (default qgg)")
      ->check(CLI::IsMember({"hgg", "qgg"}));
  sweep->add_option("--stable", cli.stable_id, "stable pose id (default: all)");
  auto* report = app.add_subcommand("report", "summarize datasets and trial results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = resolve_config(cli);
    if (*synth) return cmd_synth(cfg);
    if (*ingest) return cmd_ingest(cfg, cli);
    if (*train_hgg) return cmd_train(cfg, ModelKind::hgg);
    if (*extend) return cmd_extend(cfg);
    if (*train_qgg) return cmd_train(cfg, ModelKind::qgg);
    if (*plan) return cmd_plan(cfg, cli);
    if (*trials) return cmd_trials(cfg);
    if (*sweep) return cmd_sweep(cfg, cli);
    if (*report) return cmd_report(cfg);
    return 1;
  } catch (const PlanningFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
