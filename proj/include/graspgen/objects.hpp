#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "graspgen/math_core.hpp"

namespace graspgen {

struct SdfNode;
using SdfNodePtr = std::shared_ptr<const SdfNode>;

/// Solid box centered at the origin.
struct SdfBox {
  Vec3 half_extents;
};

/// Solid cylinder along the z axis, centered at the origin.
struct SdfCylinder {
  double radius = 0.0;
  double half_height = 0.0;
};

/// Capsule: segment from a to b with a spherical radius.
struct SdfCapsule {
  Vec3 a, b;
  double radius = 0.0;
};

/// Circular-arc tube in the x-y plane around the z axis. The arc spans
/// `arc` radians symmetrically about the +y axis at distance major_radius;
/// the tube cross-section radius is minor_radius. Arc in (0, 2*pi].
struct SdfTorusSegment {
  double major_radius = 0.0;
  double minor_radius = 0.0;
  double arc = 0.0;
};

struct SdfUnion {
  std::vector<SdfNodePtr> children;
};

/// Base solid minus the cut solid.
struct SdfDifference {
  SdfNodePtr base;
  SdfNodePtr cut;
};

/// Child solid placed at `pose` relative to this node's frame.
struct SdfPosed {
  Pose pose;
  SdfNodePtr child;
};

struct SdfNode {
  std::variant<SdfBox, SdfCylinder, SdfCapsule, SdfTorusSegment, SdfUnion, SdfDifference,
               SdfPosed>
      shape;
};

/// Signed distance at p: negative inside, positive outside. Exact for the
/// primitives; union/difference use the min/max bound, so composite values
/// are a bound on the true distance (exact near non-overlapping surfaces).
double sdf_eval(const SdfNode& node, const Vec3& p);

/// Outward unit surface normal from central differences (step 1e-5 m).
/// Meaningful near the surface; throws std::runtime_error when the sampled
/// gradient is degenerate (norm < 1e-9).
Vec3 sdf_normal(const SdfNode& node, const Vec3& p);

/// Axis-aligned bounding box of the solid, conservative for composites.
struct Aabb {
  Vec3 lo, hi;
};
Aabb sdf_bounds(const SdfNode& node);

/// A resting placement of an object on a tabletop.
struct StablePose {
  int id = 0;
  /// Object frame expressed in a table frame whose z = 0 plane is the
  /// tabletop and whose +z points up.
  Pose object_pose_on_table;
  /// The tabletop plane re-expressed in the object frame; normal points
  /// away from the table into free space.
  PlaneEq tabletop_plane_obj;
};

/// Rigid object model: signed distance field plus resting poses.
struct SdfObject {
  std::string name;
  double mass_kg = 0.0;
  SdfNodePtr root;
  std::vector<StablePose> stable_poses;
};

double object_sdf(const SdfObject& obj, const Vec3& p);
Vec3 object_normal(const SdfObject& obj, const Vec3& p);

/// The built-in desk-scale objects: bent_pipe (2 stable poses),
/// cinder_block (3), pulley (2).
std::vector<SdfObject> builtin_objects();

/// Lookup by name among the builtins. Throws std::invalid_argument for
/// unknown names.
SdfObject builtin_object(const std::string& name);

/// Loads an object description from a JSON file (schema in
/// docs/object_format.md). Validates dimensions, tree depth (max 16),
/// stable poses and table clearance; throws std::runtime_error with a
/// description on any violation.
SdfObject load_object_json(const std::string& path);

/// Writes an object to the same JSON schema load_object_json reads.
void save_object_json(const SdfObject& obj, const std::string& path);

/// Checks that a stable pose does not sink the object below the table:
/// every occupied sample point on a `step`-spaced grid must be above the
/// tabletop plane by at least -tol. Returns the minimum clearance found.
double stable_pose_clearance(const SdfObject& obj, const StablePose& pose, double step = 0.005);

/// Builds a StablePose from an on-table pose, deriving the tabletop plane.
StablePose make_stable_pose(int id, const Pose& object_pose_on_table);

/// Grid scan of the object in a chosen frame: all points of an axis-aligned
/// grid (spacing `step`) whose signed distance is <= 0, expressed in the
/// scan frame. `frame_in_obj` maps scan-frame points into the object frame.
std::vector<Vec3> occupied_grid_points(const SdfObject& obj, const Pose& frame_in_obj,
                                       const Aabb& box, double step);

}  // namespace graspgen
