#include "graspgen/math_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace graspgen {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  if (n < 1e-12) throw std::invalid_argument("normalized: vector norm below 1e-12");
  return {v.x / n, v.y / n, v.z / n};
}

Quat quat_canonical(const Quat& q) {
  bool flip = false;
  if (q.w < 0.0) {
    flip = true;
  } else if (q.w == 0.0) {
    if (q.x != 0.0) {
      flip = q.x < 0.0;
    } else if (q.y != 0.0) {
      flip = q.y < 0.0;
    } else {
      flip = q.z < 0.0;
    }
  }
  if (flip) return {-q.x, -q.y, -q.z, -q.w};
  return q;
}

Quat quat_normalize(double x, double y, double z, double w) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(w))
    throw std::invalid_argument("quat_normalize: non-finite component");
  double n = std::sqrt(x * x + y * y + z * z + w * w);
  if (n < 1e-12) throw std::invalid_argument("quat_normalize: norm below 1e-12");
  return quat_canonical({x / n, y / n, z / n, w / n});
}

Quat quat_mul(const Quat& a, const Quat& b) {
  return {a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
          a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z};
}

Quat quat_conjugate(const Quat& q) { return {-q.x, -q.y, -q.z, q.w}; }

Vec3 quat_rotate(const Quat& q, const Vec3& v) {
  // v' = v + 2 w (u x v) + 2 u x (u x v), u = (x, y, z)
  Vec3 u{q.x, q.y, q.z};
  Vec3 t = cross(u, v);
  Vec3 t2 = cross(u, t);
  return {v.x + 2.0 * (q.w * t.x + t2.x), v.y + 2.0 * (q.w * t.y + t2.y),
          v.z + 2.0 * (q.w * t.z + t2.z)};
}

std::array<Vec3, 3> quat_to_matrix(const Quat& q) {
  return {quat_rotate(q, {1, 0, 0}), quat_rotate(q, {0, 1, 0}), quat_rotate(q, {0, 0, 1})};
}

Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  Vec3 u = normalized(axis);
  double s = std::sin(0.5 * angle);
  return quat_canonical({u.x * s, u.y * s, u.z * s, std::cos(0.5 * angle)});
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.position + quat_rotate(a.orientation, b.position),
          quat_canonical(quat_mul(a.orientation, b.orientation))};
}

Pose pose_inverse(const Pose& p) {
  Quat qi = quat_conjugate(p.orientation);
  return {-quat_rotate(qi, p.position), quat_canonical(qi)};
}

Vec3 pose_apply(const Pose& p, const Vec3& v) {
  return quat_rotate(p.orientation, v) + p.position;
}

Vec3 pose_rotate(const Pose& p, const Vec3& v) { return quat_rotate(p.orientation, v); }

double plane_eval(const PlaneEq& p, const Vec3& v) {
  return p.a * v.x + p.b * v.y + p.c * v.z + p.d;
}

PlaneEq plane_in_frame(const PlaneEq& parent_plane, const Pose& child_in_parent) {
  // n_parent . (R p_child + t) + d = (R^T n_parent) . p_child + (n_parent . t + d)
  Vec3 n{parent_plane.a, parent_plane.b, parent_plane.c};
  Vec3 nc = quat_rotate(quat_conjugate(child_in_parent.orientation), n);
  double dc = dot(n, child_in_parent.position) + parent_plane.d;
  return {nc.x, nc.y, nc.z, dc};
}

namespace {

// One-sided Jacobi on a tall column-major matrix: orthogonalizes column
// pairs until the relative off-diagonal norm of A^T A drops below tol.
// Singular values are the final column norms.
void one_sided_jacobi(std::vector<double>& a, int rows, int cols, double tol, int max_sweeps) {
  auto col = [&](int c) { return a.data() + static_cast<std::ptrdiff_t>(c) * rows; };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < cols - 1; ++i) {
      for (int j = i + 1; j < cols; ++j) {
        double* ci = col(i);
        double* cj = col(j);
        double aii = 0.0, ajj = 0.0, aij = 0.0;
        for (int r = 0; r < rows; ++r) {
          aii += ci[r] * ci[r];
          ajj += cj[r] * cj[r];
          aij += ci[r] * cj[r];
        }
        double scale = std::sqrt(aii * ajj);
        if (scale <= 0.0) continue;
        off = std::max(off, std::abs(aij) / scale);
        if (std::abs(aij) <= tol * scale) continue;
        double tau = (ajj - aii) / (2.0 * aij);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (int r = 0; r < rows; ++r) {
          double vi = ci[r];
          double vj = cj[r];
          ci[r] = c * vi - s * vj;
          cj[r] = s * vi + c * vj;
        }
      }
    }
    if (off < tol) break;
  }
}

}  // namespace

std::array<double, 6> singular_values(const Mat6& m) {
  for (double v : m.a) {
    if (!std::isfinite(v)) throw std::invalid_argument("singular_values: non-finite entry");
  }
  if (m.cols > 64) throw std::invalid_argument("singular_values: more than 64 columns");

  std::array<double, 6> out{};
  if (m.cols == 0) return out;

  // Work on the tall orientation so columns never outnumber rows.
  int rows, cols;
  std::vector<double> work;
  if (m.cols >= 6) {
    rows = m.cols;
    cols = 6;
    work.resize(static_cast<std::size_t>(rows) * cols);
    // column c of work = row c of m
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) work[static_cast<std::size_t>(c) * rows + r] = m.at(c, r);
  } else {
    rows = 6;
    cols = m.cols;
    work = m.a;
  }

  one_sided_jacobi(work, rows, cols, 1e-12, 100);

  for (int c = 0; c < cols; ++c) {
    double s2 = 0.0;
    for (int r = 0; r < rows; ++r) {
      double v = work[static_cast<std::size_t>(c) * rows + r];
      s2 += v * v;
    }
    out[static_cast<std::size_t>(c)] = std::sqrt(s2);
  }
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

}  // namespace graspgen
