#include "graspgen/grasp_eval.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace graspgen {

const char* failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "none";
    case FailureReason::invalid_start: return "invalid_start";
    case FailureReason::table_collision: return "table_collision";
    case FailureReason::no_lift: return "no_lift";
    case FailureReason::zero_msv: return "zero_msv";
  }
  return "unknown";
}

GraspOutcome evaluate_grasp(const SdfObject& obj, const StablePose& stable,
                            const GripperConfig& config, const EvalParams& params) {
  const Quat& q0 = config.pose.orientation;
  double qn = std::sqrt(q0.x * q0.x + q0.y * q0.y + q0.z * q0.z + q0.w * q0.w);
  if (!std::isfinite(qn) || std::abs(qn - 1.0) > 1e-6)
    throw std::invalid_argument("configuration quaternion must be unit length");

  GraspOutcome out;
  CloseResult closed = close_fingers(params.gripper, config, obj);
  out.state = closed.state;
  if (closed.status == CloseStatus::invalid_start) {
    out.failure_reason = FailureReason::invalid_start;
    return out;
  }
  out.contacts = closed.contacts;

  const PlaneEq& table = stable.tabletop_plane_obj;
  if (check_table_collision(params.gripper, config, FingerState::open(), table) ||
      check_table_collision(params.gripper, config, closed.state, table)) {
    out.failure_reason = FailureReason::table_collision;
    return out;
  }

  Vec3 up{table.a, table.b, table.c};
  if (!can_resist_gravity(closed.contacts, obj.mass_kg, up, params.gravity)) {
    out.failure_reason = FailureReason::no_lift;
    return out;
  }

  double q = q_msv(closed.contacts);
  if (q <= params.min_quality) {
    out.failure_reason = FailureReason::zero_msv;
    return out;
  }
  out.success = true;
  out.quality = q;
  return out;
}

std::vector<GraspOutcome> evaluate_batch(const SdfObject& obj, const StablePose& stable,
                                         const std::vector<GripperConfig>& configs,
                                         const EvalParams& params, int workers) {
  if (workers < 1) throw std::invalid_argument("worker count must be positive");
  std::vector<GraspOutcome> results(configs.size());
  if (configs.empty()) return results;
  int n = std::min<int>(workers, static_cast<int>(configs.size()));
  if (n == 1) {
    for (size_t i = 0; i < configs.size(); ++i)
      results[i] = evaluate_grasp(obj, stable, configs[i], params);
    return results;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n));
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= configs.size()) return;
        results[i] = evaluate_grasp(obj, stable, configs[i], params);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

double metric_noise(const GraspOutcome& outcome, double amplitude, Rng& rng) {
  if (!(amplitude >= 0.0 && amplitude <= 0.5))
    throw std::invalid_argument("noise amplitude must be in [0, 0.5]");
  if (!outcome.success) return 0.0;
  if (amplitude == 0.0) return outcome.quality;
  return outcome.quality * (1.0 + rng.uniform(-amplitude, amplitude));
}

}  // namespace graspgen
