#include "graspgen/gripper.hpp"

#include <cmath>
#include <stdexcept>

namespace graspgen {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct FingerFrame {
  Vec3 base;     // base joint position, grasp frame
  Vec3 outward;  // rest direction in the palm plane
};

FingerFrame finger_frame(const GripperGeometry& geom, double theta, int finger) {
  const double z = -geom.palm_offset;
  const double c = std::cos(theta), s = std::sin(theta);
  switch (finger) {
    case 0:
      return {{-geom.finger_base_x, geom.finger_base_y, z}, {-s, c, 0}};
    case 1:
      return {{geom.finger_base_x, geom.finger_base_y, z}, {s, c, 0}};
    default:
      return {{0, -geom.finger_base_y, z}, {0, -1, 0}};
  }
}

void check_theta(double theta) {
  if (!(theta >= 0.0 && theta <= kPi / 2))
    throw std::invalid_argument("spread angle must be in [0, pi/2]");
}

// Direction of a phalanx at flexion angle phi: phi = 0 lies flat outward,
// pi/2 points along the approach axis, beyond folds over the grasp center.
Vec3 flex_direction(const Vec3& outward, double phi) {
  return std::cos(phi) * outward + Vec3{0, 0, std::sin(phi)};
}

}  // namespace

std::array<Pose, 3> finger_base_frames(const GripperGeometry& geom, double theta) {
  check_theta(theta);
  std::array<Pose, 3> out;
  for (int f = 0; f < 3; ++f) {
    FingerFrame fr = finger_frame(geom, theta, f);
    // Yaw mapping +y onto the outward direction; +z stays the palm normal.
    double ang = std::atan2(-fr.outward.x, fr.outward.y);
    out[static_cast<size_t>(f)] = Pose{fr.base, quat_from_axis_angle({0, 0, 1}, ang)};
  }
  return out;
}

std::array<Vec3, 8> phalanx_axis_samples(const GripperGeometry& geom, double theta, int finger,
                                         int phalanx, const FingerState& state) {
  FingerFrame fr = finger_frame(geom, theta, finger);
  auto f = static_cast<size_t>(finger);
  std::array<Vec3, 8> pts;
  if (phalanx == 0) {
    Vec3 dir = flex_direction(fr.outward, state.proximal[f]);
    for (int i = 0; i < 8; ++i) {
      double t = static_cast<double>(i + 1) / 8.0;
      pts[static_cast<size_t>(i)] = fr.base + (t * geom.proximal_length) * dir;
    }
  } else {
    Vec3 pd = flex_direction(fr.outward, state.proximal[f]);
    Vec3 tip = fr.base + geom.proximal_length * pd;
    Vec3 dir = flex_direction(fr.outward, state.proximal[f] + state.distal[f]);
    for (int i = 0; i < 8; ++i) {
      double t = static_cast<double>(i + 1) / 8.0;
      pts[static_cast<size_t>(i)] = tip + (t * geom.distal_length) * dir;
    }
  }
  return pts;
}

std::vector<Vec3> palm_samples(const GripperGeometry& geom) {
  std::vector<Vec3> pts;
  const double zf = -geom.palm_offset;
  const double zb = zf - geom.palm_thickness;
  pts.push_back({0, 0, zf});
  pts.push_back({0, 0, zb});
  for (int k = 0; k < 8; ++k) {
    double a = 2.0 * kPi * static_cast<double>(k) / 8.0;
    double cx = geom.palm_radius * std::cos(a);
    double cy = geom.palm_radius * std::sin(a);
    pts.push_back({cx, cy, zf});
    pts.push_back({cx, cy, zb});
  }
  return pts;
}

CloseResult close_fingers(const GripperGeometry& geom, const GripperConfig& config,
                          const SdfObject& obj) {
  check_theta(config.spread);
  CloseResult res;

  auto to_obj = [&](const Vec3& p) { return pose_apply(config.pose, p); };

  for (const Vec3& p : palm_samples(geom)) {
    if (object_sdf(obj, to_obj(p)) <= 0.0) {
      res.status = CloseStatus::invalid_start;
      return res;
    }
  }

  auto phalanx_touches = [&](int finger, int phalanx) {
    auto pts = phalanx_axis_samples(geom, config.spread, finger, phalanx, res.state);
    for (const Vec3& p : pts) {
      if (object_sdf(obj, to_obj(p)) <= geom.contact_tolerance) return true;
    }
    return false;
  };

  for (int f = 0; f < 3; ++f) {
    auto fi = static_cast<size_t>(f);
    // Whole finger flexes at the proximal joint until anything touches.
    while (res.state.proximal[fi] < geom.proximal_limit) {
      if (phalanx_touches(f, 0) || phalanx_touches(f, 1)) break;
      res.state.proximal[fi] =
          std::min(res.state.proximal[fi] + geom.angle_step, geom.proximal_limit);
    }
    // Breakaway: the distal link keeps flexing until its own contact.
    while (res.state.distal[fi] < geom.distal_limit) {
      if (phalanx_touches(f, 1)) break;
      res.state.distal[fi] = std::min(res.state.distal[fi] + geom.angle_step, geom.distal_limit);
    }
  }

  // Record the deepest in-contact sample of each phalanx, projected onto
  // the surface along the local gradient.
  for (int f = 0; f < 3; ++f) {
    auto fi = static_cast<size_t>(f);
    for (int ph = 0; ph < 2; ++ph) {
      auto pts = phalanx_axis_samples(geom, config.spread, f, ph, res.state);
      double best = geom.contact_tolerance;
      Vec3 best_pt;
      bool found = false;
      for (const Vec3& p : pts) {
        Vec3 po = to_obj(p);
        double d = object_sdf(obj, po);
        if (d <= best) {
          best = d;
          best_pt = po;
          found = true;
        }
      }
      if (found) {
        Vec3 n_out = object_normal(obj, best_pt);
        Vec3 surf = best_pt - object_sdf(obj, best_pt) * n_out;
        res.contacts.push_back({surf, -object_normal(obj, surf)});
        if (ph == 0)
          res.state.proximal_contact[fi] = true;
        else
          res.state.distal_contact[fi] = true;
      }
    }
  }
  return res;
}

bool check_table_collision(const GripperGeometry& geom, const GripperConfig& config,
                           const FingerState& state, const PlaneEq& table_obj) {
  check_theta(config.spread);
  const double slack = -0.001;
  for (const Vec3& p : palm_samples(geom)) {
    if (plane_eval(table_obj, pose_apply(config.pose, p)) < slack) return true;
  }
  for (int f = 0; f < 3; ++f) {
    for (int ph = 0; ph < 2; ++ph) {
      for (const Vec3& p : phalanx_axis_samples(geom, config.spread, f, ph, state)) {
        double h = plane_eval(table_obj, pose_apply(config.pose, p)) - geom.phalanx_radius;
        if (h < slack) return true;
      }
    }
  }
  return false;
}

}  // namespace graspgen
