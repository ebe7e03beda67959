#include "graspgen/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace graspgen {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* const kCsvHeader = "x,y,z,qx,qy,qz,qw,theta,a,b,c,d,stable_pose_id,quality";

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

[[noreturn]] void fail_line(const std::string& path, int line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& field, const std::string& path, int line,
                    const char* column) {
  if (field.empty()) fail_line(path, line, std::string("empty value in column ") + column);
  const char* s = field.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end != s + field.size())
    fail_line(path, line, "bad number '" + field + "' in column " + column);
  if (!std::isfinite(v))
    fail_line(path, line, std::string("non-finite value in column ") + column);
  return v;
}

int parse_pose_id(const std::string& field, const std::string& path, int line) {
  if (field.empty()) fail_line(path, line, "empty value in column stable_pose_id");
  const char* s = field.c_str();
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (end != s + field.size())
    fail_line(path, line, "bad integer '" + field + "' in column stable_pose_id");
  if (v < 0) fail_line(path, line, "negative stable_pose_id");
  return static_cast<int>(v);
}

// Empty string when the record is valid, otherwise a description.
std::string record_issue(const GraspRecord& r) {
  const double vals[] = {r.position.x,    r.position.y,    r.position.z,    r.orientation.x,
                         r.orientation.y, r.orientation.z, r.orientation.w, r.theta,
                         r.tabletop.a,    r.tabletop.b,    r.tabletop.c,    r.tabletop.d};
  for (double v : vals)
    if (!std::isfinite(v)) return "non-finite field";
  const Quat& q = r.orientation;
  double qn = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z + q.w * q.w);
  if (std::abs(qn - 1.0) > 1e-6) return "quaternion norm " + fmt9(qn) + " is not unit within 1e-6";
  // 1e-8 absorbs the 9-significant-digit rounding of pi/2 in the CSV form.
  if (r.theta < -1e-8 || r.theta > kPi / 2 + 1e-8)
    return "spread angle " + fmt9(r.theta) + " outside [0, pi/2]";
  double pn = std::sqrt(r.tabletop.a * r.tabletop.a + r.tabletop.b * r.tabletop.b +
                        r.tabletop.c * r.tabletop.c);
  if (std::abs(pn - 1.0) > 1e-6) return "plane normal norm " + fmt9(pn) + " is not unit within 1e-6";
  if (r.stable_pose_id < 0) return "negative stable_pose_id";
  if (r.quality && (!std::isfinite(*r.quality) || *r.quality < 0.0))
    return "quality must be a finite non-negative number";
  return "";
}

}  // namespace

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::primitive:
      return "primitive";
    case Provenance::generated:
      return "generated";
    default:
      return "extended";
  }
}

GraspDataset load_csv(const std::string& path, const std::string& object_name,
                      Provenance provenance) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  GraspDataset ds;
  ds.object_name = object_name;
  ds.provenance = provenance;

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file, expected header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    fail_line(path, 1, std::string("bad header, expected '") + kCsvHeader + "'");

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) fail_line(path, lineno, "blank line");
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 14)
      fail_line(path, lineno, "expected 14 fields, got " + std::to_string(f.size()));

    GraspRecord r;
    r.position = {parse_double(f[0], path, lineno, "x"), parse_double(f[1], path, lineno, "y"),
                  parse_double(f[2], path, lineno, "z")};
    Quat q{parse_double(f[3], path, lineno, "qx"), parse_double(f[4], path, lineno, "qy"),
           parse_double(f[5], path, lineno, "qz"), parse_double(f[6], path, lineno, "qw")};
    // Sign canonicalization is an exact negation, so it cannot disturb the
    // byte-stable round trip of already-canonical files.
    r.orientation = quat_canonical(q);
    r.theta = parse_double(f[7], path, lineno, "theta");
    r.tabletop = {parse_double(f[8], path, lineno, "a"), parse_double(f[9], path, lineno, "b"),
                  parse_double(f[10], path, lineno, "c"), parse_double(f[11], path, lineno, "d")};
    r.stable_pose_id = parse_pose_id(f[12], path, lineno);
    if (!f[13].empty()) r.quality = parse_double(f[13], path, lineno, "quality");

    std::string issue = record_issue(r);
    if (!issue.empty()) fail_line(path, lineno, issue);
    // The decimal form can overshoot the exact spread bounds by a few 1e-9;
    // clamp so loaded records stay inside the gripper's hard joint range.
    // Clamped values print to the same 9-digit form, keeping saves stable.
    r.theta = std::min(std::max(r.theta, 0.0), kPi / 2);
    ds.records.push_back(r);
  }
  return ds;
}

void save_csv(const GraspDataset& dataset, const std::string& path) {
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    std::string issue = record_issue(dataset.records[i]);
    if (!issue.empty())
      throw std::invalid_argument("record " + std::to_string(i) + ": " + issue);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << kCsvHeader << '\n';
  for (const GraspRecord& r : dataset.records) {
    Quat q = quat_canonical(r.orientation);
    out << fmt9(r.position.x) << ',' << fmt9(r.position.y) << ',' << fmt9(r.position.z) << ','
        << fmt9(q.x) << ',' << fmt9(q.y) << ',' << fmt9(q.z) << ',' << fmt9(q.w) << ','
        << fmt9(r.theta) << ',' << fmt9(r.tabletop.a) << ',' << fmt9(r.tabletop.b) << ','
        << fmt9(r.tabletop.c) << ',' << fmt9(r.tabletop.d) << ',' << r.stable_pose_id << ',';
    if (r.quality) out << fmt9(*r.quality);
    out << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

NormStats fit_norm(const GraspDataset& dataset) {
  if (dataset.records.empty())
    throw std::runtime_error("cannot fit normalization ranges on an empty dataset");
  NormStats s;
  s.lo.fill(std::numeric_limits<double>::infinity());
  s.hi.fill(-std::numeric_limits<double>::infinity());
  auto upd = [&s](int i, double v) {
    if (v < s.lo[i]) s.lo[i] = v;
    if (v > s.hi[i]) s.hi[i] = v;
  };
  for (const GraspRecord& r : dataset.records) {
    upd(0, r.position.x);
    upd(1, r.position.y);
    upd(2, r.position.z);
    upd(3, r.theta);
  }
  static const char* const names[4] = {"x", "y", "z", "theta"};
  for (int i = 0; i < 4; ++i)
    if (!(s.hi[i] > s.lo[i]))
      throw std::runtime_error(std::string("degenerate normalization range for field ") +
                               names[i] + ": max equals min");
  return s;
}

std::array<double, 12> normalize(const GraspRecord& record, const NormStats& stats) {
  auto scale = [&stats](int i, double v) { return (v - stats.lo[i]) / (stats.hi[i] - stats.lo[i]); };
  return {scale(0, record.position.x),
          scale(1, record.position.y),
          scale(2, record.position.z),
          record.orientation.x,
          record.orientation.y,
          record.orientation.z,
          record.orientation.w,
          scale(3, record.theta),
          record.tabletop.a,
          record.tabletop.b,
          record.tabletop.c,
          record.tabletop.d};
}

GraspRecord denormalize(const std::array<double, 12>& v, const NormStats& stats) {
  auto unscale = [&stats](int i, double x) { return stats.lo[i] + x * (stats.hi[i] - stats.lo[i]); };
  GraspRecord r;
  r.position = {unscale(0, v[0]), unscale(1, v[1]), unscale(2, v[2])};
  r.orientation = quat_canonical(Quat{v[3], v[4], v[5], v[6]});
  r.theta = unscale(3, v[7]);
  r.tabletop = {v[8], v[9], v[10], v[11]};
  return r;
}

// ---------------------------------------------------------------------------
// Primitive synthesis.
//
// Each stable pose is scanned on a 5 mm grid in the table frame; the
// resulting point cloud drives a handful of grasp-type templates. Every
// candidate is evaluated and only successes are kept, so the templates only
// need to land in roughly the right neighborhood.

namespace {

constexpr int kWedgeBins = 16;

struct PoseProbe {
  std::vector<Vec3> top;  // occupied points within 12 mm of the highest one
  double z_max = 0.0;
  Vec3 centroid;
  Vec3 long_axis{1, 0, 0};  // horizontal principal axis of the body
  double axis_halfspan = 0.0;  // body half-extent along long_axis
  std::array<double, kWedgeBins> wedge_radius{};
  double max_radius = 0.0;
};

PoseProbe probe_pose(const SdfObject& obj, const StablePose& sp) {
  Aabb ob = sdf_bounds(*obj.root);
  Vec3 lo{1e18, 1e18, 1e18}, hi{-1e18, -1e18, -1e18};
  for (int k = 0; k < 8; ++k) {
    Vec3 c{(k & 1) ? ob.hi.x : ob.lo.x, (k & 2) ? ob.hi.y : ob.lo.y, (k & 4) ? ob.hi.z : ob.lo.z};
    Vec3 w = pose_apply(sp.object_pose_on_table, c);
    lo = {std::min(lo.x, w.x), std::min(lo.y, w.y), std::min(lo.z, w.z)};
    hi = {std::max(hi.x, w.x), std::max(hi.y, w.y), std::max(hi.z, w.z)};
  }
  lo.z = std::max(lo.z, -0.001);
  std::vector<Vec3> pts =
      occupied_grid_points(obj, pose_inverse(sp.object_pose_on_table), Aabb{lo, hi}, 0.005);
  if (pts.empty())
    throw std::runtime_error("stable pose " + std::to_string(sp.id) +
                             " of object " + obj.name + " occupies no grid points");

  PoseProbe p;
  for (const Vec3& q : pts) p.z_max = std::max(p.z_max, q.z);
  Vec3 sum{0, 0, 0};
  for (const Vec3& q : pts) sum = sum + q;
  p.centroid = (1.0 / static_cast<double>(pts.size())) * sum;

  double cxx = 0, cxy = 0, cyy = 0;
  for (const Vec3& q : pts) {
    double dx = q.x - p.centroid.x, dy = q.y - p.centroid.y;
    cxx += dx * dx;
    cxy += dx * dy;
    cyy += dy * dy;
    double r = std::hypot(dx, dy);
    p.max_radius = std::max(p.max_radius, r);
    int bin = static_cast<int>(std::floor((std::atan2(dy, dx) + kPi) / (2 * kPi) * kWedgeBins));
    bin = std::min(std::max(bin, 0), kWedgeBins - 1);
    p.wedge_radius[bin] = std::max(p.wedge_radius[bin], r);
    if (q.z >= p.z_max - 0.012) p.top.push_back(q);
  }
  double ang = 0.5 * std::atan2(2 * cxy, cxx - cyy);
  p.long_axis = {std::cos(ang), std::sin(ang), 0};
  for (const Vec3& q : pts) {
    double s = (q.x - p.centroid.x) * p.long_axis.x + (q.y - p.centroid.y) * p.long_axis.y;
    p.axis_halfspan = std::max(p.axis_halfspan, std::abs(s));
  }
  return p;
}

// Horizontal principal direction of the top-band points near p.
Vec3 local_tangent(const std::vector<Vec3>& top, const Vec3& p) {
  double sx = 0, sy = 0;
  int n = 0;
  for (const Vec3& q : top)
    if (std::hypot(q.x - p.x, q.y - p.y) < 0.025) {
      sx += q.x;
      sy += q.y;
      ++n;
    }
  if (n < 2) return {1, 0, 0};
  double mx = sx / n, my = sy / n;
  double cxx = 0, cxy = 0, cyy = 0;
  for (const Vec3& q : top)
    if (std::hypot(q.x - p.x, q.y - p.y) < 0.025) {
      double dx = q.x - mx, dy = q.y - my;
      cxx += dx * dx;
      cxy += dx * dy;
      cyy += dy * dy;
    }
  double ang = 0.5 * std::atan2(2 * cxy, cxx - cyy);
  return {std::cos(ang), std::sin(ang), 0};
}

// Straight-down approach with the given world yaw.
Quat topdown_quat(double yaw) {
  return quat_mul(quat_from_axis_angle({0, 0, 1}, yaw), quat_from_axis_angle({1, 0, 0}, kPi));
}

// Approach from azimuth `az`, tilted `tilt` radians away from straight
// down, with the finger line kept horizontal so the open fingers clear the
// table.
Quat side_quat(double az, double tilt) {
  return quat_mul(quat_from_axis_angle({0, 0, 1}, az - kPi / 2),
                  quat_mul(quat_from_axis_angle({1, 0, 0}, kPi - tilt),
                           quat_from_axis_angle({0, 0, 1}, -kPi / 2)));
}

struct Candidate {
  Pose pose_table;
  double theta = 0.0;
};

// Pinch or wrap around a feature of the top band, approaching from above.
// The origin sits 4 to 6 cm above the feature so that contacts land near
// the fingertips; a lower origin leaves the straightened distal phalanx of
// any finger that stops mid-sweep hanging below the table.
Candidate make_top(const PoseProbe& pr, double theta, Rng& rng) {
  const Vec3 p = pr.top[rng.index(pr.top.size())];
  Vec3 t = local_tangent(pr.top, p);
  Vec3 m{-t.y, t.x, 0};  // pinch direction, across the local feature
  double yaw = std::atan2(m.y, m.x) + kPi / 2 + rng.uniform(-0.15, 0.15);
  Vec3 pos{p.x + rng.uniform(-0.004, 0.004), p.y + rng.uniform(-0.004, 0.004),
           p.z + rng.uniform(0.042, 0.062)};
  return {Pose{pos, topdown_quat(yaw)}, theta};
}

// Fully spread tripod dropped over the body from above.
Candidate make_envelope(const PoseProbe& pr, Rng& rng) {
  double yaw = std::atan2(pr.long_axis.y, pr.long_axis.x) + rng.uniform(-0.2, 0.2);
  // Slide along the body's long axis so elongated objects yield wrap
  // grasps over their whole length, not only at the centroid.
  double slide = rng.uniform(-0.5, 0.5) * pr.axis_halfspan;
  Vec3 pos{pr.centroid.x + pr.long_axis.x * slide + rng.uniform(-0.006, 0.006),
           pr.centroid.y + pr.long_axis.y * slide + rng.uniform(-0.006, 0.006),
           pr.z_max + rng.uniform(0.008, 0.045)};
  return {Pose{pos, topdown_quat(yaw)}, kPi / 2};
}

// Tilted pinch from the side, standing off from the outermost surface at
// the sampled azimuth, origin slightly above the body's top.
Candidate make_side(const PoseProbe& pr, Rng& rng) {
  double az = rng.uniform(0.0, 2 * kPi);
  int bin = static_cast<int>(std::floor((std::remainder(az, 2 * kPi) + kPi) / (2 * kPi) * kWedgeBins));
  bin = std::min(std::max(bin, 0), kWedgeBins - 1);
  double wr = pr.wedge_radius[bin] > 0 ? pr.wedge_radius[bin] : pr.max_radius;
  double rho = wr + 0.010 + rng.uniform(-0.003, 0.003);
  double tilt = 1.0471975511965976 + rng.uniform(-0.08, 0.08);  // about 60 deg
  double h = pr.z_max + rng.uniform(0.008, 0.020);
  Vec3 pos{pr.centroid.x + std::cos(az) * rho, pr.centroid.y + std::sin(az) * rho, h};
  return {Pose{pos, side_quat(az, tilt)}, 0.0};
}

}  // namespace

GraspDataset synth_primitives(const SdfObject& obj, int target_count, Rng& rng,
                              const EvalParams& params) {
  if (target_count <= 0) throw std::invalid_argument("target_count must be positive");
  if (obj.stable_poses.empty()) throw std::invalid_argument("object has no stable poses");

  std::vector<PoseProbe> probes;
  probes.reserve(obj.stable_poses.size());
  for (const StablePose& sp : obj.stable_poses) probes.push_back(probe_pose(obj, sp));

  GraspDataset ds;
  ds.object_name = obj.name;
  ds.provenance = Provenance::primitive;

  // The target is split evenly across stable poses (earlier poses absorb
  // the remainder). Filling per-pose quotas instead of taking whatever
  // candidate happens to pass keeps a pose with a low acceptance rate
  // from being underrepresented; downstream training conditions on the
  // pose, so every placement needs comparable coverage.
  const int n_poses = static_cast<int>(obj.stable_poses.size());
  for (int p = 0; p < n_poses; ++p) {
    const int quota = target_count / n_poses + (p < target_count % n_poses ? 1 : 0);
    const long max_attempts = 50L * quota + 50;
    const PoseProbe& pr = probes[p];
    const StablePose& sp = obj.stable_poses[p];
    int made = 0;
    long attempts = 0;
    int kind = 0;  // 0 pinch, 1 wrap pi/6, 2 wrap pi/4, 3 envelope, 4 side pinch
    while (made < quota) {
      if (attempts >= max_attempts)
        throw std::runtime_error("insufficient primitives for " + obj.name + ": stable pose " +
                                 std::to_string(sp.id) + " yielded " + std::to_string(made) +
                                 " of " + std::to_string(quota) + " within " +
                                 std::to_string(max_attempts) + " attempts");
      ++attempts;
      Candidate c;
      switch (kind++ % 5) {
        case 0:
          c = make_top(pr, 0.0, rng);
          break;
        case 1:
          c = make_top(pr, kPi / 6, rng);
          break;
        case 2:
          c = make_top(pr, kPi / 4, rng);
          break;
        case 3:
          c = make_envelope(pr, rng);
          break;
        default:
          c = make_side(pr, rng);
          break;
      }
      Pose pose_obj = pose_compose(pose_inverse(sp.object_pose_on_table), c.pose_table);
      pose_obj.orientation = quat_canonical(pose_obj.orientation);
      GripperConfig cfg{pose_obj, c.theta};
      GraspOutcome out = evaluate_grasp(obj, sp, cfg, params);
      if (!out.success) continue;

      GraspRecord r;
      r.position = pose_obj.position;
      r.orientation = pose_obj.orientation;
      r.theta = c.theta;
      r.tabletop = sp.tabletop_plane_obj;
      r.stable_pose_id = sp.id;
      ds.records.push_back(r);
      ++made;
    }
  }
  return ds;
}

}  // namespace graspgen
