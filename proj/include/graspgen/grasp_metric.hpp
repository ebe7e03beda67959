#pragma once

#include <vector>

#include "graspgen/gripper.hpp"
#include "graspgen/math_core.hpp"

namespace graspgen {

/// Orthonormal contact frame for a unit inward normal: two tangents plus
/// the normal as the third column. The first tangent is built against a
/// fixed world axis (x, or y when the normal is nearly parallel to x), so
/// the frame is a deterministic function of the normal.
void contact_frame(const Vec3& normal, Vec3& t1, Vec3& t2);

/// 6 x 3k grasp map of k point contacts with friction: per contact the
/// three frame directions as force columns, each paired with the torque it
/// produces about the object origin. Throws std::invalid_argument when a
/// normal is not unit length (1e-6) or a component is not finite.
Mat6 build_grasp_map(const std::vector<Contact>& contacts);

/// Grasp quality: the smallest of the grasp map's six zero-padded singular
/// values. Zero for fewer than two contacts.
double q_msv(const std::vector<Contact>& contacts);

struct GravityCheckOptions {
  double friction = 0.8;
  /// Upper bound on the summed normal-force magnitudes across all pyramid
  /// edges (a crude actuator budget, in newtons).
  double total_normal_budget = 20.0;
  double gravity = 9.80665;  // m/s^2
};

/// Result of the gravity feasibility check. When feasible, edge_forces
/// holds one nonnegative coefficient per pyramid edge (8 per contact, in
/// contact order) certifying the balance; tests recheck the certificate
/// against the raw constraints.
struct GravityCertificate {
  bool feasible = false;
  std::vector<double> edge_forces;
};

/// Whether nonnegative combinations of friction-pyramid edge forces at the
/// contacts can balance the object's weight within the force budget. Each
/// contact contributes 8 edges n + mu*(cos(phi_j) t1 + sin(phi_j) t2); the
/// weight acts at the object origin along -up (unit, pointing away from
/// the table). Solved as a phase-1 simplex feasibility problem.
GravityCertificate resist_gravity_certificate(const std::vector<Contact>& contacts,
                                              double mass_kg, const Vec3& up,
                                              const GravityCheckOptions& opts = {});

bool can_resist_gravity(const std::vector<Contact>& contacts, double mass_kg, const Vec3& up,
                        const GravityCheckOptions& opts = {});

}  // namespace graspgen
