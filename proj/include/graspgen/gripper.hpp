#pragma once

#include <array>
#include <vector>

#include "graspgen/math_core.hpp"
#include "graspgen/objects.hpp"

namespace graspgen {

/// Point where a finger touches the object, in the object frame.
/// The normal is the inward surface normal: the direction a finger can
/// push, pointing from the surface into the object.
struct Contact {
  Vec3 position;
  Vec3 normal;
};

/// Three-finger underactuated hand, two phalanges per finger.
///
/// The grasp frame has +z as the approach axis (palm normal, pointing from
/// the palm toward the space between the fingers) and its origin floating
/// in front of the palm, between the fingers. Fingers 0 and 1 sit on the
/// +y side of the palm and spread symmetrically by rotating +theta / -theta
/// about the palm normal; finger 2 is fixed on the -y side, opposing them.
/// At zero joint angles a finger lies flat along the palm plane pointing
/// radially outward; flexing sweeps it up through the approach direction
/// and over toward the opposing side.
struct GripperGeometry {
  double palm_radius = 0.045;
  double palm_thickness = 0.02;
  /// Distance from the grasp-frame origin back to the palm face.
  double palm_offset = 0.055;
  /// Finger base positions on the palm face, grasp frame (z fixed at
  /// -palm_offset). x spacing of the two spreading fingers and y reach of
  /// all three.
  double finger_base_x = 0.02;
  double finger_base_y = 0.04;
  double proximal_length = 0.07;
  double distal_length = 0.056;
  double phalanx_radius = 0.009;
  double proximal_limit = 2.44;  // rad
  double distal_limit = 0.84;    // rad
  /// Closing step for the quasi-static sweep (0.5 degrees).
  double angle_step = 0.00872664625997164788;
  /// A phalanx sample within this distance of the surface is in contact.
  double contact_tolerance = 0.001;
};

/// Placement of the grasp frame in the object frame plus the spread angle.
struct GripperConfig {
  Pose pose;
  double spread = 0.0;  // theta in [0, pi/2]
};

/// Joint state after (or before) closing, plus per-phalanx contact flags.
struct FingerState {
  std::array<double, 3> proximal{0.0, 0.0, 0.0};
  std::array<double, 3> distal{0.0, 0.0, 0.0};
  std::array<bool, 3> proximal_contact{false, false, false};
  std::array<bool, 3> distal_contact{false, false, false};

  static FingerState open() { return FingerState{}; }
};

/// Base frame of each finger in the grasp frame at spread theta: the pose
/// origin is the base joint, +y the rest (outward) direction of the finger,
/// +z the palm normal. Throws std::invalid_argument if theta is outside
/// [0, pi/2].
std::array<Pose, 3> finger_base_frames(const GripperGeometry& geom, double theta);

enum class CloseStatus {
  ok,
  /// The palm already intersected the object before closing.
  invalid_start,
};

struct CloseResult {
  CloseStatus status = CloseStatus::ok;
  FingerState state;
  std::vector<Contact> contacts;
};

/// Quasi-static closing. Each finger independently: the whole finger flexes
/// at the proximal joint until any of its sample points reaches the contact
/// tolerance or the joint limit; then the distal joint keeps flexing on its
/// own until its own contact or limit (breakaway behavior of underactuated
/// hands). Per phalanx the deepest in-contact sample becomes a contact,
/// with its position projected onto the surface. Zero contacts is a valid
/// outcome; only an initially penetrating palm is an invalid start.
CloseResult close_fingers(const GripperGeometry& geom, const GripperConfig& config,
                          const SdfObject& obj);

/// True when any gripper collision sample at the given joint state lies
/// below the tabletop plane by more than 1 mm. Palm samples are surface
/// points of the palm disc; phalanx samples are capsule-axis points checked
/// with the phalanx radius. The plane is expressed in the object frame,
/// like the config.
bool check_table_collision(const GripperGeometry& geom, const GripperConfig& config,
                           const FingerState& state, const PlaneEq& table_obj);

/// Axis sample points of one phalanx (8 per phalanx) in the grasp frame.
/// finger in [0,3), phalanx 0 = proximal, 1 = distal. Exposed for collision
/// checking and tests.
std::array<Vec3, 8> phalanx_axis_samples(const GripperGeometry& geom, double theta, int finger,
                                         int phalanx, const FingerState& state);

/// Palm collision sample points (disc surface) in the grasp frame.
std::vector<Vec3> palm_samples(const GripperGeometry& geom);

}  // namespace graspgen
