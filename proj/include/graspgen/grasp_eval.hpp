#pragma once

#include <vector>

#include "graspgen/grasp_metric.hpp"
#include "graspgen/gripper.hpp"
#include "graspgen/objects.hpp"
#include "graspgen/rng.hpp"

namespace graspgen {

enum class FailureReason {
  none,
  invalid_start,
  table_collision,
  no_lift,
  zero_msv,
};

const char* failure_reason_name(FailureReason r);

/// Result of one simulated grasp trial. Failures always carry quality
/// exactly 0; success implies quality > 0 and reason none.
struct GraspOutcome {
  bool success = false;
  double quality = 0.0;
  FailureReason failure_reason = FailureReason::none;
  std::vector<Contact> contacts;
  FingerState state;
};

struct EvalParams {
  GripperGeometry gripper;
  GravityCheckOptions gravity;
  /// Qualities at or below this count as a degenerate wrench space.
  double min_quality = 1e-9;
};

/// Evaluates one gripper configuration against an object resting in the
/// given stable pose. Steps, in order: close the fingers (a penetrating
/// palm fails as invalid_start); check table collision at the open and the
/// closed joint states; check that the contacts can hold the object's
/// weight (static lift proxy, fails as no_lift); compute the grasp quality
/// (fails as zero_msv when degenerate). Throws std::invalid_argument for a
/// non-unit configuration quaternion or an out-of-range spread angle; all
/// grasp failures are in-band outcomes, not errors.
GraspOutcome evaluate_grasp(const SdfObject& obj, const StablePose& stable,
                            const GripperConfig& config, const EvalParams& params = {});

/// Evaluates many configurations, optionally across threads. Results are
/// in input order and bit-identical to sequential evaluation regardless of
/// the worker count (each item is evaluated independently).
std::vector<GraspOutcome> evaluate_batch(const SdfObject& obj, const StablePose& stable,
                                         const std::vector<GripperConfig>& configs,
                                         const EvalParams& params, int workers);

/// Simulated label variability: scales a successful outcome's quality by
/// (1 + uniform(-amplitude, amplitude)). Failed outcomes stay at 0 and
/// amplitude 0 leaves the value untouched without consuming randomness.
/// Amplitude must lie in [0, 0.5].
double metric_noise(const GraspOutcome& outcome, double amplitude, Rng& rng);

}  // namespace graspgen
