#include "graspgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace graspgen {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt9(*v) : std::string();
}

const StablePose& find_stable(const SdfObject& obj, int id) {
  for (const StablePose& sp : obj.stable_poses) {
    if (sp.id == id) return sp;
  }
  throw std::invalid_argument("record references stable pose " + std::to_string(id) +
                              " which object " + obj.name + " does not have");
}

GripperConfig config_of(const GraspRecord& r) {
  return GripperConfig{Pose{r.position, r.orientation}, r.theta};
}

}  // namespace

GraspDataset extend_dataset(const VaeModel& hgg, const SdfObject& obj,
                            const GraspDataset& primitives, int per_stable,
                            const EvalParams& eval, Rng& rng, int workers,
                            double noise_amplitude) {
  if (per_stable <= 0) throw std::invalid_argument("per-stable sample count must be positive");
  if (workers < 1) throw std::invalid_argument("worker count must be at least 1");
  if (obj.stable_poses.empty()) {
    throw std::invalid_argument("object " + obj.name + " has no stable poses");
  }

  GraspDataset out;
  out.object_name = obj.name;
  out.provenance = Provenance::extended;
  out.records = primitives.records;
  for (const StablePose& sp : obj.stable_poses) {
    std::vector<GraspRecord> gen = sample_grasps(hgg, sp, per_stable, SampleMode::prior, rng);
    out.records.insert(out.records.end(), gen.begin(), gen.end());
  }

  // Group by stable pose so each group evaluates as one batch; results
  // land back at their source indices, keeping the merge order fixed.
  std::map<int, std::vector<std::size_t>> by_pose;
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    by_pose[out.records[i].stable_pose_id].push_back(i);
  }
  std::vector<GraspOutcome> outcomes(out.records.size());
  for (const auto& [pose_id, idx] : by_pose) {
    const StablePose& sp = find_stable(obj, pose_id);
    std::vector<GripperConfig> configs;
    configs.reserve(idx.size());
    for (std::size_t i : idx) configs.push_back(config_of(out.records[i]));
    std::vector<GraspOutcome> res = evaluate_batch(obj, sp, configs, eval, workers);
    for (std::size_t k = 0; k < idx.size(); ++k) outcomes[idx[k]] = std::move(res[k]);
  }

  for (std::size_t i = 0; i < out.records.size(); ++i) {
    out.records[i].quality = noise_amplitude > 0.0
                                 ? metric_noise(outcomes[i], noise_amplitude, rng)
                                 : outcomes[i].quality;
  }
  return out;
}

StatsBlock dataset_stats(const GraspDataset& dataset) {
  StatsBlock s;
  s.total = static_cast<int>(dataset.records.size());
  std::vector<double> q;
  for (const GraspRecord& r : dataset.records) {
    if (r.quality && *r.quality > 0.0) q.push_back(*r.quality);
  }
  s.successful = static_cast<int>(q.size());
  if (q.empty()) return s;
  std::sort(q.begin(), q.end());
  s.mean = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
  s.median = q.size() % 2 ? q[q.size() / 2]
                          : 0.5 * (q[q.size() / 2 - 1] + q[q.size() / 2]);
  s.max = q.back();
  return s;
}

double pick_threshold(const GraspDataset& dataset, const ThresholdPolicy& policy) {
  if (policy.kind == ThresholdPolicy::Kind::fixed) {
    if (!(policy.value >= 0.0)) {
      throw std::invalid_argument("fixed threshold must be non-negative");
    }
    return policy.value;
  }
  if (!(policy.value >= 0.0) || !(policy.value <= 100.0)) {
    throw std::invalid_argument("percentile must lie in [0, 100]");
  }
  std::vector<double> q;
  for (const GraspRecord& r : dataset.records) {
    if (r.quality && *r.quality > 0.0) q.push_back(*r.quality);
  }
  if (q.empty()) {
    throw std::runtime_error("cannot derive a quality threshold: no successful records");
  }
  std::sort(q.begin(), q.end());
  const double rank = policy.value / 100.0 * static_cast<double>(q.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, q.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return q[lo] + (q[hi] - q[lo]) * frac;
}

bool reachable(const Pose& config_world, const Aabb& workspace) {
  const Vec3& p = config_world.position;
  if (p.x < workspace.lo.x || p.x > workspace.hi.x || p.y < workspace.lo.y ||
      p.y > workspace.hi.y || p.z < workspace.lo.z || p.z > workspace.hi.z) {
    return false;
  }
  // Angle between the approach axis and vertical-down stays within 135
  // degrees: cos(angle) = -approach.z >= cos(135 deg).
  const Vec3 approach = quat_rotate(config_world.orientation, Vec3{0, 0, 1});
  return -approach.z >= -std::sqrt(0.5);
}

PlanResult plan_grasp(const VaeModel& qgg, const SdfObject& obj, const StablePose& stable,
                      const Pose& object_world, const PlannerParams& params, Rng& rng) {
  (void)obj;
  if (qgg.kind != ModelKind::qgg) {
    throw std::invalid_argument("planning requires a quality-predicting model");
  }
  if (!(params.threshold >= 0.0)) {
    throw std::invalid_argument("planning threshold must be non-negative");
  }
  if (params.candidates < 1 || params.sample_cap < 1) {
    throw std::invalid_argument("candidate count and sample cap must be positive");
  }

  const PlaneEq table_world{0.0, 0.0, 1.0, 0.0};
  PlanResult result;
  std::vector<GraspRecord> candidates;
  candidates.reserve(params.candidates);
  while (static_cast<int>(candidates.size()) < params.candidates) {
    if (result.telemetry.total_samples >= params.sample_cap) {
      throw PlanningFailure(
          "planning failed: " + std::to_string(params.sample_cap) +
          " samples exhausted with " + std::to_string(candidates.size()) + " of " +
          std::to_string(params.candidates) + " candidates (threshold " +
          fmt9(params.threshold) + ")");
    }
    ++result.telemetry.total_samples;
    const double lat = rng.normal();
    const Decoded d = decode(qgg, lat, stable.tabletop_plane_obj);
    const double predicted = *d.quality;
    if (!(predicted > params.threshold)) continue;
    ++result.telemetry.threshold_passes;

    GraspRecord rec = denormalize(d.fields, qgg.stats);
    rec.stable_pose_id = stable.id;
    rec.quality = predicted;

    ++result.telemetry.line5_checks;
    const Pose world = pose_compose(object_world, Pose{rec.position, rec.orientation});
    const bool collides = check_table_collision(params.gripper, GripperConfig{world, rec.theta},
                                                FingerState::open(), table_world);
    if (collides || !reachable(world, params.workspace)) continue;
    candidates.push_back(rec);
  }

  result.choice = candidates.front();
  for (const GraspRecord& c : candidates) {
    if (*c.quality > *result.choice.quality) result.choice = c;
  }
  return result;
}

TrialReport run_trials(const VaeModel& qgg, const SdfObject& obj,
                       const GraspDataset& extended, const PlannerParams& params,
                       int poses_per_stable, const EvalParams& eval, Rng& rng) {
  if (poses_per_stable <= 0) {
    throw std::invalid_argument("poses per stable pose must be positive");
  }
  if (obj.stable_poses.empty()) {
    throw std::invalid_argument("object " + obj.name + " has no stable poses");
  }

  TrialReport report;
  report.object_name = obj.name;
  report.dataset = dataset_stats(extended);
  report.total.stable_pose_id = -1;

  long total_line5 = 0, total_planned = 0;
  double total_err = 0.0;
  long total_err_n = 0;

  for (const StablePose& sp : obj.stable_poses) {
    TrialBucket b;
    b.stable_pose_id = sp.id;
    long line5 = 0, planned = 0, err_n = 0;
    double err = 0.0;
    for (int t = 0; t < poses_per_stable; ++t) {
      const double x = rng.uniform(-0.05, 0.05);
      const double y = rng.uniform(-0.05, 0.05);
      const double yaw = rng.uniform(0.0, 2.0 * kPi);
      const Pose object_world = pose_compose(
          Pose{Vec3{x, y, 0.0}, quat_from_axis_angle(Vec3{0, 0, 1}, yaw)},
          sp.object_pose_on_table);
      ++b.trials;
      PlanResult plan;
      try {
        plan = plan_grasp(qgg, obj, sp, object_world, params, rng);
      } catch (const PlanningFailure&) {
        ++b.planning_failures;
        continue;
      }
      ++planned;
      line5 += plan.telemetry.line5_checks;
      const GraspOutcome o = evaluate_grasp(obj, sp, config_of(plan.choice), eval);
      if (o.success) {
        ++b.successes;
        err += std::abs(*plan.choice.quality - o.quality) / o.quality;
        ++err_n;
      }
    }
    b.success_rate = 100.0 * b.successes / b.trials;
    if (planned > 0) b.mean_line5 = static_cast<double>(line5) / planned;
    if (err_n > 0) b.mean_pred_err = 100.0 * err / err_n;

    report.total.trials += b.trials;
    report.total.successes += b.successes;
    report.total.planning_failures += b.planning_failures;
    total_line5 += line5;
    total_planned += planned;
    total_err += err;
    total_err_n += err_n;
    report.per_stable.push_back(b);
  }

  report.total.success_rate = 100.0 * report.total.successes / report.total.trials;
  if (total_planned > 0) {
    report.total.mean_line5 = static_cast<double>(total_line5) / total_planned;
  }
  if (total_err_n > 0) report.total.mean_pred_err = 100.0 * total_err / total_err_n;
  return report;
}

std::string format_trial_report(const TrialReport& report) {
  std::ostringstream os;
  char line[256];
  os << "object: " << report.object_name << "\n";
  std::snprintf(line, sizeof line, "dataset: %d records, %d successful", report.dataset.total,
                report.dataset.successful);
  os << line;
  if (report.dataset.successful > 0) {
    std::snprintf(line, sizeof line, "; quality median %s mean %s max %s",
                  fmt9(*report.dataset.median).c_str(), fmt9(*report.dataset.mean).c_str(),
                  fmt9(*report.dataset.max).c_str());
    os << line;
  }
  os << "\n";
  auto bucket_line = [&os, &line](const char* label, const TrialBucket& b) {
    std::snprintf(line, sizeof line,
                  "%s: trials %d, successes %d (%.1f%%), planning failures %d", label,
                  b.trials, b.successes, b.success_rate, b.planning_failures);
    os << line;
    if (b.mean_line5) {
      std::snprintf(line, sizeof line, ", mean admissibility checks %.2f", *b.mean_line5);
      os << line;
    }
    if (b.mean_pred_err) {
      std::snprintf(line, sizeof line, ", mean prediction error %.1f%%", *b.mean_pred_err);
      os << line;
    }
    os << "\n";
  };
  bucket_line("total", report.total);
  for (const TrialBucket& b : report.per_stable) {
    std::string label = "  stable pose " + std::to_string(b.stable_pose_id);
    bucket_line(label.c_str(), b);
  }
  return os.str();
}

void save_trial_report_csv(const TrialReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "object,scope,stable_pose_id,trials,successes,planning_failures,"
         "success_rate_pct,mean_line5_checks,mean_pred_err_pct,"
         "dataset_total,dataset_successful,dataset_median,dataset_mean,dataset_max\n";
  auto row = [&](const char* scope, const TrialBucket& b, bool with_stats) {
    out << report.object_name << ',' << scope << ',' << b.stable_pose_id << ','
        << b.trials << ',' << b.successes << ',' << b.planning_failures << ','
        << fmt9(b.success_rate) << ',' << fmt_opt(b.mean_line5) << ','
        << fmt_opt(b.mean_pred_err) << ',';
    if (with_stats) {
      out << report.dataset.total << ',' << report.dataset.successful << ','
          << fmt_opt(report.dataset.median) << ',' << fmt_opt(report.dataset.mean) << ','
          << fmt_opt(report.dataset.max);
    } else {
      out << ",,,,";
    }
    out << '\n';
  };
  row("total", report.total, true);
  for (const TrialBucket& b : report.per_stable) row("stable_pose", b, false);
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

SweepReport latent_sweep_report(const VaeModel& model, const StablePose& stable, int n,
                                const GraspDataset& primitives, double lo, double hi) {
  if (n < 2) throw std::invalid_argument("sweep needs at least 2 rows");
  if (!(lo <= hi)) throw std::invalid_argument("sweep range must satisfy lo <= hi");
  SweepReport rep;
  rep.has_quality = model.kind == ModelKind::qgg;
  rep.rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    SweepRow row;
    row.latent = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const Decoded d = decode(model, row.latent, stable.tabletop_plane_obj);
    row.record = denormalize(d.fields, model.stats);
    row.record.stable_pose_id = stable.id;
    row.record.quality = d.quality;
    rep.rows.push_back(row);
  }
  for (const GraspRecord& r : primitives.records) {
    if (r.stable_pose_id != stable.id) continue;
    SweepRow row;
    row.latent = encode(model, normalize(r, model.stats)).mean;
    row.record = r;
    rep.primitive_overlay.push_back(row);
  }
  return rep;
}

void save_sweep_csv(const SweepReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "l,x,y,z,qx,qy,qz,qw,theta";
  if (report.has_quality) out << ",quality";
  out << ",kind\n";
  auto row = [&](const SweepRow& r, const char* kind) {
    const GraspRecord& g = r.record;
    const Quat q = quat_canonical(g.orientation);
    out << fmt9(r.latent) << ',' << fmt9(g.position.x) << ',' << fmt9(g.position.y) << ','
        << fmt9(g.position.z) << ',' << fmt9(q.x) << ',' << fmt9(q.y) << ',' << fmt9(q.z)
        << ',' << fmt9(q.w) << ',' << fmt9(g.theta);
    if (report.has_quality) {
      out << ',' << (g.quality ? fmt9(*g.quality) : std::string());
    }
    out << ',' << kind << '\n';
  };
  for (const SweepRow& r : report.rows) row(r, "sweep");
  for (const SweepRow& r : report.primitive_overlay) row(r, "primitive");
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace graspgen
