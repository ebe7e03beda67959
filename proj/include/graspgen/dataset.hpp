#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "graspgen/grasp_eval.hpp"
#include "graspgen/math_core.hpp"
#include "graspgen/objects.hpp"
#include "graspgen/rng.hpp"

namespace graspgen {

/// One gripper configuration in the object frame, paired with the tabletop
/// plane of its stable pose. Quality is present once the grasp has been
/// evaluated (0 for failed grasps), absent for raw primitives.
struct GraspRecord {
  Vec3 position;
  Quat orientation;  // unit, canonical sign
  double theta = 0.0;
  PlaneEq tabletop;
  int stable_pose_id = 0;
  std::optional<double> quality;
};

enum class Provenance { primitive, generated, extended };
const char* provenance_name(Provenance p);

struct GraspDataset {
  std::vector<GraspRecord> records;
  std::string object_name;
  Provenance provenance = Provenance::primitive;
};

/// CSV columns, in order:
///   x,y,z,qx,qy,qz,qw,theta,a,b,c,d,stable_pose_id,quality
/// Doubles are written with 9 significant digits; quality is blank when
/// absent; a header row is required. Saving, loading, and saving again is
/// byte-stable. Object name and provenance are not stored in the file;
/// pass them to load_csv. Errors name the offending line.
GraspDataset load_csv(const std::string& path, const std::string& object_name = "",
                      Provenance provenance = Provenance::primitive);
void save_csv(const GraspDataset& dataset, const std::string& path);

/// Min-max ranges for the scaled fields, in order x, y, z, theta.
/// Quaternion and plane components pass through unscaled: they are already
/// bounded and the orientation head's unit-norm output would not survive
/// per-component scaling.
struct NormStats {
  std::array<double, 4> lo{};
  std::array<double, 4> hi{};
};

/// Scans the dataset for per-field ranges. Throws std::runtime_error on an
/// empty dataset or a field with no spread (max = min).
NormStats fit_norm(const GraspDataset& dataset);

/// 12-vector layout: x,y,z (scaled to [0,1]), qx,qy,qz,qw, theta (scaled),
/// a,b,c,d.
std::array<double, 12> normalize(const GraspRecord& record, const NormStats& stats);

/// Inverse of normalize for the geometric fields; stable_pose_id and
/// quality are left at their defaults for the caller to fill. The
/// orientation is canonicalized, so canonical records round-trip exactly.
GraspRecord denormalize(const std::array<double, 12>& v, const NormStats& stats);

/// Generates about `target_count` validated primitive grasps for the
/// object: per stable pose, grasp-type templates (top pinch, top wraps,
/// enveloping grasp, tilted side pinch) probe the resting geometry and
/// emit jittered candidates; only configurations that evaluate_grasp marks
/// successful are kept. Spread angle is limited to {0, pi/6, pi/4, pi/2};
/// jitter moves the pose, never the spread. Throws std::runtime_error if
/// the target cannot be reached within 50x oversampling.
GraspDataset synth_primitives(const SdfObject& obj, int target_count, Rng& rng,
                              const EvalParams& params = {});

}  // namespace graspgen
