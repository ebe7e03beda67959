#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "graspgen/dataset.hpp"
#include "graspgen/grasp_eval.hpp"
#include "graspgen/objects.hpp"
#include "graspgen/rng.hpp"
#include "graspgen/vae.hpp"

namespace graspgen {

/// Samples per_stable grasps from the generator's prior for every stable
/// pose, labels them through the evaluator (failures carry quality 0),
/// labels the primitives the same way, and merges everything into one
/// extended dataset. noise_amplitude > 0 perturbs successful labels via
/// metric_noise, drawn in record order so the result is independent of
/// the worker count.
GraspDataset extend_dataset(const VaeModel& hgg, const SdfObject& obj,
                            const GraspDataset& primitives, int per_stable,
                            const EvalParams& eval, Rng& rng, int workers = 1,
                            double noise_amplitude = 0.0);

/// Quality statistics over the successful records only. A dataset with no
/// successes reports absent statistics rather than zeros.
struct StatsBlock {
  int total = 0;
  int successful = 0;
  std::optional<double> median;
  std::optional<double> mean;
  std::optional<double> max;
};

StatsBlock dataset_stats(const GraspDataset& dataset);

struct ThresholdPolicy {
  enum class Kind { fixed, percentile };
  Kind kind = Kind::percentile;
  double value = 60.0;  // threshold for fixed, p for percentile

  static ThresholdPolicy fixed(double v) { return {Kind::fixed, v}; }
  static ThresholdPolicy percentile(double p) { return {Kind::percentile, p}; }
};

/// Fixed policy returns its value; percentile policy interpolates the
/// p-th percentile (rank = p/100 * (n-1), linear) of successful-record
/// quality. Throws when the dataset holds no successful records.
double pick_threshold(const GraspDataset& dataset, const ThresholdPolicy& policy);

/// Workspace proxy: the grasp frame origin must lie inside the box and
/// the approach axis (+z of the grasp frame) must point no more than 135
/// degrees away from vertical-down.
bool reachable(const Pose& config_world, const Aabb& workspace);

struct PlannerParams {
  double threshold = 0.0;
  Aabb workspace{{-0.4, -0.4, -0.02}, {0.4, 0.4, 0.5}};
  int candidates = 3;
  int sample_cap = 10000;
  GripperGeometry gripper;
};

/// Raised when the planner exhausts its sample cap. Callers running trial
/// campaigns treat it as a failed trial rather than an error.
struct PlanningFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PlanTelemetry {
  int total_samples = 0;
  int threshold_passes = 0;
  int line5_checks = 0;  // admissibility evaluations
};

struct PlanResult {
  GraspRecord choice;  // object frame; quality holds the prediction
  PlanTelemetry telemetry;
};

/// The planning loop: sample the prior, decode with the stable pose's
/// plane, keep candidates whose predicted quality exceeds the threshold
/// and which are admissible at the object's world pose (no table
/// collision with open fingers, reachable workspace), stop at
/// params.candidates of them, and return the one with the highest
/// predicted quality. Throws a planning-failure error when sample_cap
/// draws cannot produce enough candidates.
PlanResult plan_grasp(const VaeModel& qgg, const SdfObject& obj, const StablePose& stable,
                      const Pose& object_world, const PlannerParams& params, Rng& rng);

struct TrialBucket {
  int stable_pose_id = 0;
  int trials = 0;
  int successes = 0;
  int planning_failures = 0;
  double success_rate = 0.0;  // percent
  std::optional<double> mean_line5;     // over trials that produced a plan
  std::optional<double> mean_pred_err;  // percent, over successful executions
};

struct TrialReport {
  std::string object_name;
  TrialBucket total;
  std::vector<TrialBucket> per_stable;
  StatsBlock dataset;  // statistics of the extended dataset behind the QGG
};

/// Trial campaign: per stable pose, places the object at poses_per_stable
/// world poses (uniform position in a 10 x 10 cm square, uniform yaw),
/// plans a grasp and executes the choice through the evaluator. A
/// planning failure counts as a failed trial. Prediction error is
/// |predicted - evaluated| / evaluated over successful executions.
TrialReport run_trials(const VaeModel& qgg, const SdfObject& obj,
                       const GraspDataset& extended, const PlannerParams& params,
                       int poses_per_stable, const EvalParams& eval, Rng& rng);

std::string format_trial_report(const TrialReport& report);
void save_trial_report_csv(const TrialReport& report, const std::string& path);

struct SweepRow {
  double latent = 0.0;
  GraspRecord record;
};

struct SweepReport {
  bool has_quality = false;
  std::vector<SweepRow> rows;               // n evenly spaced latents
  std::vector<SweepRow> primitive_overlay;  // encoded means of primitives
};

/// Decodes n >= 2 evenly spaced latents over [lo, hi] for the stable
/// pose, and encodes the primitives of that pose (their posterior means)
/// for scatter overlay.
SweepReport latent_sweep_report(const VaeModel& model, const StablePose& stable, int n,
                                const GraspDataset& primitives = {}, double lo = -4.5,
                                double hi = 4.5);

void save_sweep_csv(const SweepReport& report, const std::string& path);

}  // namespace graspgen
