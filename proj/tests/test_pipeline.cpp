#include "graspgen/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "graspgen/dataset.hpp"
#include "graspgen/gripper.hpp"
#include "graspgen/math_core.hpp"
#include "graspgen/objects.hpp"
#include "graspgen/vae.hpp"

using namespace graspgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

GraspDataset quality_dataset(const std::vector<double>& qualities) {
  GraspDataset ds;
  ds.object_name = "synthetic";
  for (double q : qualities) {
    GraspRecord r;
    r.orientation = Quat{0, 0, 0, 1};
    r.tabletop = PlaneEq{0, 0, 1, 0.05};
    r.quality = q;
    ds.records.push_back(r);
  }
  return ds;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

/// Labeled pulley primitives plus quick-trained generators, built once and
/// shared across the cases in this file.
struct Fixture {
  SdfObject obj;
  GraspDataset primitives;  // evaluated, so every record has a quality
  VaeModel hgg;
  VaeModel qgg;
};

const Fixture& fx() {
  static const Fixture f = [] {
    Fixture f;
    f.obj = builtin_object("pulley");
    Rng rng(411);
    f.primitives = synth_primitives(f.obj, 40, rng);
    for (const StablePose& sp : f.obj.stable_poses) {
      std::vector<GripperConfig> configs;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < f.primitives.records.size(); ++i) {
        const GraspRecord& r = f.primitives.records[i];
        if (r.stable_pose_id != sp.id) continue;
        configs.push_back(GripperConfig{Pose{r.position, r.orientation}, r.theta});
        idx.push_back(i);
      }
      const auto outcomes = evaluate_batch(f.obj, sp, configs, EvalParams{}, 1);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        f.primitives.records[idx[k]].quality = outcomes[k].quality;
      }
    }
    TrainConfig tc;
    tc.epochs = 120;
    tc.batch_size = 16;
    tc.seed = 5;
    f.hgg = train(ModelKind::hgg, ArchSpec{}, f.primitives, tc).first;
    f.qgg = train(ModelKind::qgg, ArchSpec{}, f.primitives, tc).first;
    return f;
  }();
  return f;
}

}  // namespace

TEST_CASE("pipeline: dataset statistics cover successful records only") {
  StatsBlock empty = dataset_stats(GraspDataset{});
  CHECK(empty.total == 0);
  CHECK(empty.successful == 0);
  CHECK_FALSE(empty.median.has_value());
  CHECK_FALSE(empty.mean.has_value());
  CHECK_FALSE(empty.max.has_value());

  StatsBlock failed = dataset_stats(quality_dataset({0.0, 0.0, 0.0}));
  CHECK(failed.total == 3);
  CHECK(failed.successful == 0);
  CHECK_FALSE(failed.median.has_value());

  StatsBlock one = dataset_stats(quality_dataset({0.0, 0.05}));
  CHECK(one.successful == 1);
  CHECK(*one.median == 0.05);
  CHECK(*one.mean == 0.05);
  CHECK(*one.max == 0.05);

  StatsBlock mixed = dataset_stats(quality_dataset({0.03, 0.01, 0.0, 0.02, 0.04}));
  CHECK(mixed.total == 5);
  CHECK(mixed.successful == 4);
  CHECK(*mixed.median == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(*mixed.mean == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(*mixed.max == 0.04);

  GraspDataset unlabeled = quality_dataset({0.02});
  unlabeled.records.push_back(GraspRecord{});  // no quality at all
  StatsBlock u = dataset_stats(unlabeled);
  CHECK(u.total == 2);
  CHECK(u.successful == 1);
}

TEST_CASE("pipeline: threshold policies") {
  std::vector<double> q;
  for (int i = 1; i <= 10; ++i) q.push_back(0.01 * i);
  GraspDataset ds = quality_dataset(q);

  CHECK(pick_threshold(ds, ThresholdPolicy::percentile(60.0)) ==
        doctest::Approx(0.064).epsilon(1e-12));
  CHECK(pick_threshold(ds, ThresholdPolicy::percentile(0.0)) ==
        doctest::Approx(0.01).epsilon(1e-12));
  CHECK(pick_threshold(ds, ThresholdPolicy::percentile(100.0)) ==
        doctest::Approx(0.10).epsilon(1e-12));
  CHECK(pick_threshold(ds, ThresholdPolicy::percentile(50.0)) ==
        doctest::Approx(0.055).epsilon(1e-12));

  CHECK(pick_threshold(ds, ThresholdPolicy::fixed(0.07)) == 0.07);
  CHECK(pick_threshold(GraspDataset{}, ThresholdPolicy::fixed(0.0)) == 0.0);

  CHECK_THROWS_AS((void)pick_threshold(ds, ThresholdPolicy::percentile(-1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)pick_threshold(ds, ThresholdPolicy::percentile(101.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)pick_threshold(ds, ThresholdPolicy::fixed(-0.1)),
                  std::invalid_argument);

  GraspDataset dead = quality_dataset({0.0, 0.0});
  const std::string msg =
      error_of([&] { (void)pick_threshold(dead, ThresholdPolicy::percentile(60.0)); });
  CHECK(msg.find("successful") != std::string::npos);
}

TEST_CASE("pipeline: extension merges labeled primitives with generated samples") {
  const Fixture& f = fx();
  const int per_stable = 6;
  const std::size_t n_prims = f.primitives.records.size();

  Rng rng(77);
  GraspDataset ext =
      extend_dataset(f.hgg, f.obj, f.primitives, per_stable, EvalParams{}, rng);

  REQUIRE(ext.records.size() == n_prims + per_stable * f.obj.stable_poses.size());
  CHECK(ext.object_name == "pulley");
  CHECK(ext.provenance == Provenance::extended);

  for (std::size_t i = 0; i < n_prims; ++i) {
    CHECK(ext.records[i].position.x == f.primitives.records[i].position.x);
    CHECK(ext.records[i].orientation.w == f.primitives.records[i].orientation.w);
    CHECK(ext.records[i].theta == f.primitives.records[i].theta);
    CHECK(ext.records[i].stable_pose_id == f.primitives.records[i].stable_pose_id);
  }
  for (std::size_t p = 0; p < f.obj.stable_poses.size(); ++p) {
    for (int k = 0; k < per_stable; ++k) {
      const GraspRecord& r = ext.records[n_prims + p * per_stable + k];
      CHECK(r.stable_pose_id == f.obj.stable_poses[p].id);
    }
  }
  int successes = 0;
  for (const GraspRecord& r : ext.records) {
    REQUIRE(r.quality.has_value());
    REQUIRE(*r.quality >= 0.0);
    if (*r.quality > 0.0) ++successes;
  }
  CHECK(successes > 0);

  Rng rng3(77);
  GraspDataset par =
      extend_dataset(f.hgg, f.obj, f.primitives, per_stable, EvalParams{}, rng3, 3);
  REQUIRE(par.records.size() == ext.records.size());
  for (std::size_t i = 0; i < ext.records.size(); ++i) {
    CHECK(*par.records[i].quality == *ext.records[i].quality);
    CHECK(par.records[i].position.z == ext.records[i].position.z);
  }

  Rng bad(1);
  CHECK_THROWS_AS(
      (void)extend_dataset(f.hgg, f.obj, f.primitives, 0, EvalParams{}, bad),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)extend_dataset(f.hgg, f.obj, f.primitives, 4, EvalParams{}, bad, 0),
      std::invalid_argument);
}

TEST_CASE("pipeline: reachability checks box and approach cone") {
  const Aabb box{{-0.4, -0.4, -0.02}, {0.4, 0.4, 0.5}};
  const Quat top_down = quat_from_axis_angle(Vec3{1, 0, 0}, kPi);
  const Quat upward = Quat{0, 0, 0, 1};
  const Quat sideways = quat_from_axis_angle(Vec3{1, 0, 0}, kPi / 2);

  CHECK(reachable(Pose{Vec3{0, 0, 0.1}, top_down}, box));
  CHECK(reachable(Pose{Vec3{0, 0, 0.1}, sideways}, box));
  CHECK_FALSE(reachable(Pose{Vec3{0, 0, 0.1}, upward}, box));

  // Tilted 134.9 vs 135.1 degrees away from vertical-down.
  const Quat just_in = quat_from_axis_angle(Vec3{1, 0, 0}, (180.0 - 134.9) * kPi / 180.0);
  const Quat just_out = quat_from_axis_angle(Vec3{1, 0, 0}, (180.0 - 135.1) * kPi / 180.0);
  CHECK(reachable(Pose{Vec3{0, 0, 0.1}, just_in}, box));
  CHECK_FALSE(reachable(Pose{Vec3{0, 0, 0.1}, just_out}, box));

  CHECK_FALSE(reachable(Pose{Vec3{0.5, 0, 0.1}, top_down}, box));
  CHECK_FALSE(reachable(Pose{Vec3{0, -0.41, 0.1}, top_down}, box));
  CHECK_FALSE(reachable(Pose{Vec3{0, 0, -0.1}, top_down}, box));
  CHECK(reachable(Pose{Vec3{0.4, 0.4, 0.5}, top_down}, box));  // boundary inclusive
}

TEST_CASE("pipeline: planning validations") {
  const Fixture& f = fx();
  const StablePose& sp = f.obj.stable_poses[0];
  Rng rng(5);

  CHECK_THROWS_AS((void)plan_grasp(f.hgg, f.obj, sp, sp.object_pose_on_table,
                                   PlannerParams{}, rng),
                  std::invalid_argument);
  PlannerParams bad;
  bad.threshold = -0.5;
  CHECK_THROWS_AS(
      (void)plan_grasp(f.qgg, f.obj, sp, sp.object_pose_on_table, bad, rng),
      std::invalid_argument);
  bad = PlannerParams{};
  bad.candidates = 0;
  CHECK_THROWS_AS(
      (void)plan_grasp(f.qgg, f.obj, sp, sp.object_pose_on_table, bad, rng),
      std::invalid_argument);
  bad = PlannerParams{};
  bad.sample_cap = 0;
  CHECK_THROWS_AS(
      (void)plan_grasp(f.qgg, f.obj, sp, sp.object_pose_on_table, bad, rng),
      std::invalid_argument);
}

TEST_CASE("pipeline: planner returns the best admissible candidate") {
  const Fixture& f = fx();
  const StablePose& sp = f.obj.stable_poses[0];
  const Pose object_world = sp.object_pose_on_table;
  PlannerParams params;  // threshold 0: every draw passes the quality gate

  Rng rng(900);
  PlanResult plan = plan_grasp(f.qgg, f.obj, sp, object_world, params, rng);

  CHECK(plan.telemetry.threshold_passes == plan.telemetry.total_samples);
  CHECK(plan.telemetry.line5_checks == plan.telemetry.threshold_passes);
  CHECK(plan.telemetry.line5_checks >= 3);
  REQUIRE(plan.choice.quality.has_value());
  CHECK(plan.choice.stable_pose_id == sp.id);

  // Replay the documented loop with a parallel generator and confirm the
  // planner picked the argmax of the first three admissible decodes.
  Rng replay(900);
  std::vector<GraspRecord> cands;
  int draws = 0;
  while (static_cast<int>(cands.size()) < 3) {
    ++draws;
    const double lat = replay.normal();
    const Decoded d = decode(f.qgg, lat, sp.tabletop_plane_obj);
    if (!(*d.quality > params.threshold)) continue;
    GraspRecord rec = denormalize(d.fields, f.qgg.stats);
    rec.stable_pose_id = sp.id;
    rec.quality = *d.quality;
    const Pose world = pose_compose(object_world, Pose{rec.position, rec.orientation});
    if (check_table_collision(params.gripper, GripperConfig{world, rec.theta},
                              FingerState::open(), PlaneEq{0, 0, 1, 0})) {
      continue;
    }
    if (!reachable(world, params.workspace)) continue;
    cands.push_back(rec);
  }
  const GraspRecord* best = &cands[0];
  for (const GraspRecord& c : cands) {
    if (*c.quality > *best->quality) best = &c;
  }
  CHECK(plan.telemetry.total_samples == draws);
  CHECK(plan.choice.position.x == best->position.x);
  CHECK(plan.choice.position.z == best->position.z);
  CHECK(plan.choice.orientation.w == best->orientation.w);
  CHECK(plan.choice.theta == best->theta);
  CHECK(*plan.choice.quality == *best->quality);
}

TEST_CASE("pipeline: permissive planning performs exactly three admissibility checks") {
  const Fixture& f = fx();
  const StablePose& sp = f.obj.stable_poses[0];
  PlannerParams params;

  Rng rng(31);
  PlanResult plan = plan_grasp(f.qgg, f.obj, sp, sp.object_pose_on_table, params, rng);
  // First three candidates accepted: the trained prior decodes admissible
  // grasps, so the loop never discards a sample at threshold 0.
  CHECK(plan.telemetry.total_samples == 3);
  CHECK(plan.telemetry.threshold_passes == 3);
  CHECK(plan.telemetry.line5_checks == 3);
}

TEST_CASE("pipeline: planner failure on an unreachable threshold") {
  const Fixture& f = fx();
  const StablePose& sp = f.obj.stable_poses[0];
  PlannerParams params;
  params.threshold = 1.0;  // predictions are sigmoid outputs, always below 1
  params.sample_cap = 200;

  Rng rng(6);
  CHECK_THROWS_AS((void)plan_grasp(f.qgg, f.obj, sp, sp.object_pose_on_table, params, rng),
                  PlanningFailure);
  Rng rng2(6);
  const std::string msg = error_of(
      [&] { (void)plan_grasp(f.qgg, f.obj, sp, sp.object_pose_on_table, params, rng2); });
  CHECK(msg.find("planning failed") != std::string::npos);
  CHECK(msg.find("200") != std::string::npos);
}

TEST_CASE("pipeline: trial campaign aggregates per stable pose") {
  const Fixture& f = fx();
  GraspDataset ext = f.primitives;
  ext.provenance = Provenance::extended;

  PlannerParams params;
  Rng rng(512);
  TrialReport rep = run_trials(f.qgg, f.obj, ext, params, 4, EvalParams{}, rng);

  CHECK(rep.object_name == "pulley");
  REQUIRE(rep.per_stable.size() == f.obj.stable_poses.size());
  CHECK(rep.total.trials == 4 * static_cast<int>(f.obj.stable_poses.size()));
  CHECK(rep.dataset.total == static_cast<int>(ext.records.size()));

  int trials = 0, successes = 0, failures = 0;
  for (const TrialBucket& b : rep.per_stable) {
    trials += b.trials;
    successes += b.successes;
    failures += b.planning_failures;
    CHECK(b.trials == 4);
    CHECK(b.successes <= b.trials);
    CHECK(b.success_rate == doctest::Approx(100.0 * b.successes / b.trials));
  }
  CHECK(trials == rep.total.trials);
  CHECK(successes == rep.total.successes);
  CHECK(failures == rep.total.planning_failures);
  if (rep.total.successes > 0) {
    REQUIRE(rep.total.mean_pred_err.has_value());
    CHECK(*rep.total.mean_pred_err >= 0.0);
  }
  REQUIRE(rep.total.mean_line5.has_value());
  CHECK(*rep.total.mean_line5 >= 3.0);

  Rng bad(1);
  CHECK_THROWS_AS((void)run_trials(f.qgg, f.obj, ext, params, 0, EvalParams{}, bad),
                  std::invalid_argument);
}

TEST_CASE("pipeline: planning failures count as failed trials") {
  const Fixture& f = fx();
  PlannerParams params;
  params.workspace = Aabb{{10.0, 10.0, 10.0}, {11.0, 11.0, 11.0}};  // nothing reaches
  params.sample_cap = 40;

  Rng rng(99);
  TrialReport rep = run_trials(f.qgg, f.obj, f.primitives, params, 2, EvalParams{}, rng);
  CHECK(rep.total.trials == 2 * static_cast<int>(f.obj.stable_poses.size()));
  CHECK(rep.total.successes == 0);
  CHECK(rep.total.planning_failures == rep.total.trials);
  CHECK(rep.total.success_rate == 0.0);
  CHECK_FALSE(rep.total.mean_line5.has_value());
  CHECK_FALSE(rep.total.mean_pred_err.has_value());
}

TEST_CASE("pipeline: trial report rendering is deterministic") {
  const Fixture& f = fx();
  PlannerParams params;
  Rng rng(513);
  TrialReport rep = run_trials(f.qgg, f.obj, f.primitives, params, 2, EvalParams{}, rng);

  const std::string text = format_trial_report(rep);
  CHECK(text.find("object: pulley") != std::string::npos);
  CHECK(text.find("total:") != std::string::npos);
  CHECK(text.find("stable pose") != std::string::npos);

  save_trial_report_csv(rep, "trial_report_a.csv");
  save_trial_report_csv(rep, "trial_report_b.csv");
  const std::string a = read_file("trial_report_a.csv");
  CHECK(a == read_file("trial_report_b.csv"));
  CHECK(a.find("object,scope,stable_pose_id") == 0);
  // Header plus one total row plus one row per stable pose.
  CHECK(std::count(a.begin(), a.end(), '\n') ==
        1 + 1 + static_cast<long>(rep.per_stable.size()));
  std::remove("trial_report_a.csv");
  std::remove("trial_report_b.csv");
}

TEST_CASE("pipeline: latent sweep spans the range and overlays primitives") {
  const Fixture& f = fx();
  const StablePose& sp = f.obj.stable_poses[0];

  SweepReport rep = latent_sweep_report(f.qgg, sp, 7, f.primitives);
  CHECK(rep.has_quality);
  REQUIRE(rep.rows.size() == 7);
  CHECK(rep.rows.front().latent == -4.5);
  CHECK(rep.rows.back().latent == 4.5);
  for (const SweepRow& r : rep.rows) {
    REQUIRE(r.record.quality.has_value());
    CHECK(r.record.stable_pose_id == sp.id);
  }

  std::size_t expected_overlay = 0;
  for (const GraspRecord& r : f.primitives.records) {
    if (r.stable_pose_id == sp.id) ++expected_overlay;
  }
  REQUIRE(rep.primitive_overlay.size() == expected_overlay);
  for (const SweepRow& r : rep.primitive_overlay) {
    const Encoding e = encode(f.qgg, normalize(r.record, f.qgg.stats));
    CHECK(r.latent == e.mean);
  }

  SweepReport plain = latent_sweep_report(f.hgg, sp, 3);
  CHECK_FALSE(plain.has_quality);
  CHECK(plain.primitive_overlay.empty());
  for (const SweepRow& r : plain.rows) CHECK_FALSE(r.record.quality.has_value());

  CHECK_THROWS_AS((void)latent_sweep_report(f.qgg, sp, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)latent_sweep_report(f.qgg, sp, 5, {}, 2.0, -2.0),
                  std::invalid_argument);

  save_sweep_csv(rep, "sweep_a.csv");
  const std::string a = read_file("sweep_a.csv");
  CHECK(a.find("l,x,y,z,qx,qy,qz,qw,theta,quality,kind") == 0);
  CHECK(std::count(a.begin(), a.end(), '\n') ==
        1 + 7 + static_cast<long>(expected_overlay));
  CHECK(a.find(",sweep\n") != std::string::npos);
  CHECK(a.find(",primitive\n") != std::string::npos);
  std::remove("sweep_a.csv");

  save_sweep_csv(plain, "sweep_b.csv");
  const std::string b = read_file("sweep_b.csv");
  CHECK(b.find("l,x,y,z,qx,qy,qz,qw,theta,kind") == 0);
  std::remove("sweep_b.csv");
}
