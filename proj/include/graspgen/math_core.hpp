#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace graspgen {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
inline Vec3 operator*(const Vec3& v, double s) { return s * v; }
inline Vec3 operator-(const Vec3& v) { return {-v.x, -v.y, -v.z}; }

double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);
/// Unit vector along v. Throws std::invalid_argument if ||v|| < 1e-12.
Vec3 normalized(const Vec3& v);

/// Unit rotation quaternion, Hamilton convention, components (x, y, z, w).
/// Canonical form: w >= 0; when w == 0 the first nonzero of (x, y, z) is
/// positive. Canonical form picks one representative of the q / -q pair so
/// that equal rotations compare equal as component tuples.
struct Quat {
  double x = 0.0, y = 0.0, z = 0.0, w = 1.0;
};

/// Normalizes raw components to a unit, canonical quaternion.
/// Throws std::invalid_argument when the norm is below 1e-12 or any
/// component is non-finite.
Quat quat_normalize(double x, double y, double z, double w);

/// Flips sign if needed so the quaternion is in canonical form.
Quat quat_canonical(const Quat& q);

/// Hamilton product a*b (apply b first, then a, when used as rotations).
Quat quat_mul(const Quat& a, const Quat& b);

Quat quat_conjugate(const Quat& q);

/// Rotates v by q.
Vec3 quat_rotate(const Quat& q, const Vec3& v);

/// Column-major 3x3 rotation matrix equivalent of q; col(i) = R * e_i.
std::array<Vec3, 3> quat_to_matrix(const Quat& q);

/// Quaternion for a rotation of `angle` radians about unit `axis`.
Quat quat_from_axis_angle(const Vec3& axis, double angle);

/// Rigid transform: p_parent = rotate(orientation, p_child) + position.
struct Pose {
  Vec3 position;
  Quat orientation;
};

/// a then b composition is compose(a, b): applies b first, then a.
Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);
Vec3 pose_apply(const Pose& p, const Vec3& v);
/// Rotates a direction (no translation).
Vec3 pose_rotate(const Pose& p, const Vec3& v);

/// Plane a*x + b*y + c*z + d = 0 with (a, b, c) the unit normal pointing
/// into free space. plane_eval() is then the signed height above the plane.
struct PlaneEq {
  double a = 0.0, b = 0.0, c = 1.0, d = 0.0;
};

double plane_eval(const PlaneEq& p, const Vec3& v);

/// Re-expresses a plane given in the parent frame in the child frame, where
/// `child_in_parent` is the child frame's pose in the parent.
PlaneEq plane_in_frame(const PlaneEq& parent_plane, const Pose& child_in_parent);

/// Dense 6 x n matrix, column-major. Small n only (grasp maps, n <= 64).
struct Mat6 {
  int cols = 0;
  std::vector<double> a;  // 6 * cols entries, column-major

  explicit Mat6(int n = 0) : cols(n), a(static_cast<std::size_t>(6 * n), 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(6 * c + r)]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(6 * c + r)]; }
};

/// All six singular values of a 6 x n matrix, sorted descending and
/// zero-padded when rank (or n) is below six. One-sided Jacobi on the tall
/// orientation of the matrix; converges to off-diagonal norm < 1e-12 within
/// at most 100 sweeps. Supports n up to 64. Throws std::invalid_argument on
/// non-finite input.
std::array<double, 6> singular_values(const Mat6& m);

}  // namespace graspgen
