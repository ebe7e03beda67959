#include "graspgen/objects.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace graspgen {

namespace {

using json = nlohmann::json;

constexpr double kPi = 3.14159265358979323846;
constexpr double kNormalStep = 1e-5;
constexpr int kMaxTreeDepth = 16;

double sd_box(const SdfBox& s, const Vec3& p) {
  Vec3 q{std::abs(p.x) - s.half_extents.x, std::abs(p.y) - s.half_extents.y,
         std::abs(p.z) - s.half_extents.z};
  Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
  return norm(qp) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
}

double sd_cylinder(const SdfCylinder& s, const Vec3& p) {
  double dr = std::sqrt(p.x * p.x + p.y * p.y) - s.radius;
  double dz = std::abs(p.z) - s.half_height;
  double outside = std::sqrt(std::max(dr, 0.0) * std::max(dr, 0.0) +
                             std::max(dz, 0.0) * std::max(dz, 0.0));
  return std::min(std::max(dr, dz), 0.0) + outside;
}

double sd_capsule(const SdfCapsule& s, const Vec3& p) {
  Vec3 ab = s.b - s.a;
  Vec3 ap = p - s.a;
  double denom = dot(ab, ab);
  double h = denom > 0.0 ? std::clamp(dot(ap, ab) / denom, 0.0, 1.0) : 0.0;
  return norm(ap - h * ab) - s.radius;
}

double sd_torus_segment(const SdfTorusSegment& s, const Vec3& p) {
  // Arc symmetric about +y; exact distance to the capped tube.
  double px = std::abs(p.x);
  double half = 0.5 * s.arc;
  double sn = std::sin(half), cs = std::cos(half);
  double k = (cs * px > sn * p.y) ? (px * sn + p.y * cs) : std::sqrt(px * px + p.y * p.y);
  double dd = px * px + p.y * p.y + p.z * p.z + s.major_radius * s.major_radius -
              2.0 * s.major_radius * k;
  return std::sqrt(std::max(dd, 0.0)) - s.minor_radius;
}

Aabb bounds_union(const Aabb& a, const Aabb& b) {
  return {{std::min(a.lo.x, b.lo.x), std::min(a.lo.y, b.lo.y), std::min(a.lo.z, b.lo.z)},
          {std::max(a.hi.x, b.hi.x), std::max(a.hi.y, b.hi.y), std::max(a.hi.z, b.hi.z)}};
}

int tree_depth(const SdfNode& node) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SdfUnion>) {
          int d = 0;
          for (const auto& c : s.children) d = std::max(d, tree_depth(*c));
          return d + 1;
        } else if constexpr (std::is_same_v<T, SdfDifference>) {
          return std::max(tree_depth(*s.base), tree_depth(*s.cut)) + 1;
        } else if constexpr (std::is_same_v<T, SdfPosed>) {
          return tree_depth(*s.child) + 1;
        } else {
          return 1;
        }
      },
      node.shape);
}

}  // namespace

double sdf_eval(const SdfNode& node, const Vec3& p) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SdfBox>) {
          return sd_box(s, p);
        } else if constexpr (std::is_same_v<T, SdfCylinder>) {
          return sd_cylinder(s, p);
        } else if constexpr (std::is_same_v<T, SdfCapsule>) {
          return sd_capsule(s, p);
        } else if constexpr (std::is_same_v<T, SdfTorusSegment>) {
          return sd_torus_segment(s, p);
        } else if constexpr (std::is_same_v<T, SdfUnion>) {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& c : s.children) d = std::min(d, sdf_eval(*c, p));
          return d;
        } else if constexpr (std::is_same_v<T, SdfDifference>) {
          return std::max(sdf_eval(*s.base, p), -sdf_eval(*s.cut, p));
        } else {
          static_assert(std::is_same_v<T, SdfPosed>);
          return sdf_eval(*s.child, pose_apply(pose_inverse(s.pose), p));
        }
      },
      node.shape);
}

Vec3 sdf_normal(const SdfNode& node, const Vec3& p) {
  const double h = kNormalStep;
  Vec3 g{sdf_eval(node, {p.x + h, p.y, p.z}) - sdf_eval(node, {p.x - h, p.y, p.z}),
         sdf_eval(node, {p.x, p.y + h, p.z}) - sdf_eval(node, {p.x, p.y - h, p.z}),
         sdf_eval(node, {p.x, p.y, p.z + h}) - sdf_eval(node, {p.x, p.y, p.z - h})};
  double n = norm(g);
  if (n < 1e-9) throw std::runtime_error("sdf_normal: degenerate gradient");
  return {g.x / n, g.y / n, g.z / n};
}

Aabb sdf_bounds(const SdfNode& node) {
  return std::visit(
      [](const auto& s) -> Aabb {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SdfBox>) {
          return {-s.half_extents, s.half_extents};
        } else if constexpr (std::is_same_v<T, SdfCylinder>) {
          return {{-s.radius, -s.radius, -s.half_height}, {s.radius, s.radius, s.half_height}};
        } else if constexpr (std::is_same_v<T, SdfCapsule>) {
          Vec3 lo{std::min(s.a.x, s.b.x) - s.radius, std::min(s.a.y, s.b.y) - s.radius,
                  std::min(s.a.z, s.b.z) - s.radius};
          Vec3 hi{std::max(s.a.x, s.b.x) + s.radius, std::max(s.a.y, s.b.y) + s.radius,
                  std::max(s.a.z, s.b.z) + s.radius};
          return {lo, hi};
        } else if constexpr (std::is_same_v<T, SdfTorusSegment>) {
          double r = s.major_radius + s.minor_radius;
          return {{-r, -r, -s.minor_radius}, {r, r, s.minor_radius}};
        } else if constexpr (std::is_same_v<T, SdfUnion>) {
          Aabb b{{1e30, 1e30, 1e30}, {-1e30, -1e30, -1e30}};
          for (const auto& c : s.children) b = bounds_union(b, sdf_bounds(*c));
          return b;
        } else if constexpr (std::is_same_v<T, SdfDifference>) {
          return sdf_bounds(*s.base);
        } else {
          static_assert(std::is_same_v<T, SdfPosed>);
          Aabb cb = sdf_bounds(*s.child);
          Aabb out{{1e30, 1e30, 1e30}, {-1e30, -1e30, -1e30}};
          for (int i = 0; i < 8; ++i) {
            Vec3 corner{(i & 1) ? cb.hi.x : cb.lo.x, (i & 2) ? cb.hi.y : cb.lo.y,
                        (i & 4) ? cb.hi.z : cb.lo.z};
            Vec3 w = pose_apply(s.pose, corner);
            out.lo = {std::min(out.lo.x, w.x), std::min(out.lo.y, w.y), std::min(out.lo.z, w.z)};
            out.hi = {std::max(out.hi.x, w.x), std::max(out.hi.y, w.y), std::max(out.hi.z, w.z)};
          }
          return out;
        }
      },
      node.shape);
}

double object_sdf(const SdfObject& obj, const Vec3& p) { return sdf_eval(*obj.root, p); }

Vec3 object_normal(const SdfObject& obj, const Vec3& p) { return sdf_normal(*obj.root, p); }

StablePose make_stable_pose(int id, const Pose& object_pose_on_table) {
  StablePose sp;
  sp.id = id;
  sp.object_pose_on_table = object_pose_on_table;
  sp.tabletop_plane_obj = plane_in_frame(PlaneEq{0, 0, 1, 0}, object_pose_on_table);
  return sp;
}

double stable_pose_clearance(const SdfObject& obj, const StablePose& pose, double step) {
  Aabb box = sdf_bounds(*obj.root);
  double min_clear = std::numeric_limits<double>::infinity();
  for (double x = box.lo.x; x <= box.hi.x; x += step)
    for (double y = box.lo.y; y <= box.hi.y; y += step)
      for (double z = box.lo.z; z <= box.hi.z; z += step) {
        Vec3 p{x, y, z};
        if (object_sdf(obj, p) <= 0.0)
          min_clear = std::min(min_clear, plane_eval(pose.tabletop_plane_obj, p));
      }
  return min_clear;
}

std::vector<Vec3> occupied_grid_points(const SdfObject& obj, const Pose& frame_in_obj,
                                       const Aabb& box, double step) {
  std::vector<Vec3> pts;
  for (double x = box.lo.x; x <= box.hi.x; x += step)
    for (double y = box.lo.y; y <= box.hi.y; y += step)
      for (double z = box.lo.z; z <= box.hi.z; z += step) {
        Vec3 p{x, y, z};
        if (object_sdf(obj, pose_apply(frame_in_obj, p)) <= 0.0) pts.push_back(p);
      }
  return pts;
}

namespace {

SdfNodePtr node(SdfNode&& n) { return std::make_shared<const SdfNode>(std::move(n)); }

SdfObject make_bent_pipe() {
  // Two straight tube arms joined by a 90 degree elbow, lying in the x-y
  // plane of the object frame. Dimensions are desk-scale stand-ins.
  const double bend_radius = 0.05;
  const double tube_radius = 0.02;
  const double arm_length = 0.10;

  // The capped arc spans symmetrically about +y; yaw it by -45 degrees so
  // it runs from azimuth 0 (point (R,0,0), tangent along y) to azimuth 90
  // (point (0,R,0), tangent along x).
  SdfNode elbow{SdfTorusSegment{bend_radius, tube_radius, kPi / 2}};
  SdfNode posed_elbow{
      SdfPosed{Pose{{0, 0, 0}, quat_from_axis_angle({0, 0, 1}, -kPi / 4)}, node(std::move(elbow))}};
  SdfNode arm_a{SdfCapsule{{bend_radius, 0, 0}, {bend_radius, -arm_length, 0}, tube_radius}};
  SdfNode arm_b{SdfCapsule{{0, bend_radius, 0}, {-arm_length, bend_radius, 0}, tube_radius}};

  SdfObject obj;
  obj.name = "bent_pipe";
  obj.mass_kg = 0.5;
  obj.root = node(SdfNode{SdfUnion{{node(std::move(posed_elbow)), node(std::move(arm_a)),
                                    node(std::move(arm_b))}}});
  obj.stable_poses = {
      make_stable_pose(0, Pose{{0, 0, tube_radius}, Quat{}}),
      make_stable_pose(1, Pose{{0, 0, tube_radius}, quat_from_axis_angle({1, 0, 0}, kPi)}),
  };
  return obj;
}

SdfObject make_cinder_block() {
  // Rectangular block with two through-holes along z.
  const Vec3 outer{0.095, 0.045, 0.045};
  const Vec3 hole{0.030, 0.030, 0.060};
  const double hole_offset = 0.0475;

  SdfNode shell{SdfBox{outer}};
  SdfNode hole_a{SdfPosed{Pose{{hole_offset, 0, 0}, Quat{}}, node(SdfNode{SdfBox{hole}})}};
  SdfNode hole_b{SdfPosed{Pose{{-hole_offset, 0, 0}, Quat{}}, node(SdfNode{SdfBox{hole}})}};
  SdfNode holes{SdfUnion{{node(std::move(hole_a)), node(std::move(hole_b))}}};

  SdfObject obj;
  obj.name = "cinder_block";
  obj.mass_kg = 1.2;
  obj.root = node(SdfNode{SdfDifference{node(std::move(shell)), node(std::move(holes))}});
  obj.stable_poses = {
      make_stable_pose(0, Pose{{0, 0, outer.z}, Quat{}}),
      make_stable_pose(1, Pose{{0, 0, outer.y}, quat_from_axis_angle({1, 0, 0}, kPi / 2)}),
      make_stable_pose(2, Pose{{0, 0, outer.x}, quat_from_axis_angle({0, 1, 0}, kPi / 2)}),
  };
  return obj;
}

SdfObject make_pulley() {
  // Hub with two flanges forming a belt groove, bored through the axis.
  const double hub_radius = 0.035;
  const double hub_half_height = 0.0275;
  const double flange_radius = 0.05;
  const double flange_half_height = 0.0075;
  const double flange_center_z = 0.02;
  const double bore_radius = 0.012;

  SdfNode hub{SdfCylinder{hub_radius, hub_half_height}};
  SdfNode flange_top{SdfPosed{Pose{{0, 0, flange_center_z}, Quat{}},
                              node(SdfNode{SdfCylinder{flange_radius, flange_half_height}})}};
  SdfNode flange_bot{SdfPosed{Pose{{0, 0, -flange_center_z}, Quat{}},
                              node(SdfNode{SdfCylinder{flange_radius, flange_half_height}})}};
  SdfNode body{SdfUnion{
      {node(std::move(hub)), node(std::move(flange_top)), node(std::move(flange_bot))}}};
  SdfNode bore{SdfCylinder{bore_radius, hub_half_height + 0.05}};

  SdfObject obj;
  obj.name = "pulley";
  obj.mass_kg = 0.8;
  obj.root = node(SdfNode{SdfDifference{node(std::move(body)), node(std::move(bore))}});
  obj.stable_poses = {
      make_stable_pose(0, Pose{{0, 0, hub_half_height}, Quat{}}),
      make_stable_pose(1, Pose{{0, 0, flange_radius}, quat_from_axis_angle({1, 0, 0}, kPi / 2)}),
  };
  return obj;
}

Vec3 json_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("object file: " + what + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Pose json_pose(const json& j, const std::string& what) {
  Pose p;
  p.position = json_vec3(j.at("position"), what + ".position");
  const json& q = j.at("quaternion_xyzw");
  if (!q.is_array() || q.size() != 4)
    throw std::runtime_error("object file: " + what + ".quaternion_xyzw must be [x, y, z, w]");
  double x = q[0].get<double>(), y = q[1].get<double>(), z = q[2].get<double>(),
         w = q[3].get<double>();
  double n = std::sqrt(x * x + y * y + z * z + w * w);
  if (std::abs(n - 1.0) > 1e-6)
    throw std::runtime_error("object file: " + what + " quaternion is not unit length");
  p.orientation = quat_normalize(x, y, z, w);
  return p;
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw std::runtime_error("object file: " + what + " must be positive");
}

SdfNodePtr parse_node(const json& j, int depth) {
  if (depth > kMaxTreeDepth) throw std::runtime_error("object file: node tree deeper than 16");
  if (!j.is_object()) throw std::runtime_error("object file: node must be an object");
  std::string type = j.at("type").get<std::string>();
  if (type == "box") {
    Vec3 he = json_vec3(j.at("half_extents"), "box.half_extents");
    require_positive(he.x, "box.half_extents");
    require_positive(he.y, "box.half_extents");
    require_positive(he.z, "box.half_extents");
    return node(SdfNode{SdfBox{he}});
  }
  if (type == "cylinder") {
    double r = j.at("radius").get<double>();
    double h = j.at("half_height").get<double>();
    require_positive(r, "cylinder.radius");
    require_positive(h, "cylinder.half_height");
    return node(SdfNode{SdfCylinder{r, h}});
  }
  if (type == "capsule") {
    Vec3 a = json_vec3(j.at("a"), "capsule.a");
    Vec3 b = json_vec3(j.at("b"), "capsule.b");
    double r = j.at("radius").get<double>();
    require_positive(r, "capsule.radius");
    return node(SdfNode{SdfCapsule{a, b, r}});
  }
  if (type == "torus_segment") {
    double R = j.at("major_radius").get<double>();
    double r = j.at("minor_radius").get<double>();
    double arc = j.at("arc").get<double>();
    require_positive(R, "torus_segment.major_radius");
    require_positive(r, "torus_segment.minor_radius");
    if (!(arc > 0.0 && arc <= 2 * kPi + 1e-12))
      throw std::runtime_error("object file: torus_segment.arc must be in (0, 2*pi]");
    return node(SdfNode{SdfTorusSegment{R, r, arc}});
  }
  if (type == "union") {
    SdfUnion u;
    const json& ch = j.at("children");
    if (!ch.is_array() || ch.empty())
      throw std::runtime_error("object file: union.children must be a non-empty array");
    for (const auto& c : ch) u.children.push_back(parse_node(c, depth + 1));
    return node(SdfNode{std::move(u)});
  }
  if (type == "difference") {
    SdfDifference d;
    d.base = parse_node(j.at("base"), depth + 1);
    d.cut = parse_node(j.at("cut"), depth + 1);
    return node(SdfNode{std::move(d)});
  }
  if (type == "posed") {
    SdfPosed p;
    p.pose = json_pose(j, "posed");
    p.child = parse_node(j.at("child"), depth + 1);
    return node(SdfNode{std::move(p)});
  }
  throw std::runtime_error("object file: unknown node type '" + type + "'");
}

json node_to_json(const SdfNode& n) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        json j;
        if constexpr (std::is_same_v<T, SdfBox>) {
          j["type"] = "box";
          j["half_extents"] = {s.half_extents.x, s.half_extents.y, s.half_extents.z};
        } else if constexpr (std::is_same_v<T, SdfCylinder>) {
          j["type"] = "cylinder";
          j["radius"] = s.radius;
          j["half_height"] = s.half_height;
        } else if constexpr (std::is_same_v<T, SdfCapsule>) {
          j["type"] = "capsule";
          j["a"] = {s.a.x, s.a.y, s.a.z};
          j["b"] = {s.b.x, s.b.y, s.b.z};
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, SdfTorusSegment>) {
          j["type"] = "torus_segment";
          j["major_radius"] = s.major_radius;
          j["minor_radius"] = s.minor_radius;
          j["arc"] = s.arc;
        } else if constexpr (std::is_same_v<T, SdfUnion>) {
          j["type"] = "union";
          j["children"] = json::array();
          for (const auto& c : s.children) j["children"].push_back(node_to_json(*c));
        } else if constexpr (std::is_same_v<T, SdfDifference>) {
          j["type"] = "difference";
          j["base"] = node_to_json(*s.base);
          j["cut"] = node_to_json(*s.cut);
        } else {
          static_assert(std::is_same_v<T, SdfPosed>);
          j["type"] = "posed";
          j["position"] = {s.pose.position.x, s.pose.position.y, s.pose.position.z};
          j["quaternion_xyzw"] = {s.pose.orientation.x, s.pose.orientation.y,
                                  s.pose.orientation.z, s.pose.orientation.w};
          j["child"] = node_to_json(*s.child);
        }
        return j;
      },
      n.shape);
}

}  // namespace

std::vector<SdfObject> builtin_objects() {
  return {make_bent_pipe(), make_cinder_block(), make_pulley()};
}

SdfObject builtin_object(const std::string& name) {
  for (auto& obj : builtin_objects()) {
    if (obj.name == name) return obj;
  }
  throw std::invalid_argument("unknown builtin object '" + name +
                              "' (have: bent_pipe, cinder_block, pulley)");
}

SdfObject load_object_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("object file: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("object file: parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "graspgen-object")
    throw std::runtime_error("object file: missing format tag 'graspgen-object'");
  if (j.value("version", 0) != 1) throw std::runtime_error("object file: unsupported version");

  SdfObject obj;
  obj.name = j.at("name").get<std::string>();
  if (obj.name.empty()) throw std::runtime_error("object file: empty name");
  obj.mass_kg = j.at("mass_kg").get<double>();
  require_positive(obj.mass_kg, "mass_kg");
  obj.root = parse_node(j.at("root"), 1);

  const json& poses = j.at("stable_poses");
  if (!poses.is_array() || poses.empty())
    throw std::runtime_error("object file: at least one stable pose required");
  for (const auto& sp : poses) {
    int id = sp.at("id").get<int>();
    obj.stable_poses.push_back(make_stable_pose(id, json_pose(sp, "stable_pose")));
  }
  for (size_t i = 0; i < obj.stable_poses.size(); ++i)
    for (size_t k = i + 1; k < obj.stable_poses.size(); ++k)
      if (obj.stable_poses[i].id == obj.stable_poses[k].id)
        throw std::runtime_error("object file: duplicate stable pose id");

  for (const auto& sp : obj.stable_poses) {
    double clear = stable_pose_clearance(obj, sp);
    if (clear < -1e-4)
      throw std::runtime_error("object file: stable pose " + std::to_string(sp.id) +
                               " sinks below the table by " + std::to_string(-clear) + " m");
  }
  return obj;
}

void save_object_json(const SdfObject& obj, const std::string& path) {
  json j;
  j["format"] = "graspgen-object";
  j["version"] = 1;
  j["name"] = obj.name;
  j["mass_kg"] = obj.mass_kg;
  j["root"] = node_to_json(*obj.root);
  j["stable_poses"] = json::array();
  for (const auto& sp : obj.stable_poses) {
    json p;
    p["id"] = sp.id;
    p["position"] = {sp.object_pose_on_table.position.x, sp.object_pose_on_table.position.y,
                     sp.object_pose_on_table.position.z};
    p["quaternion_xyzw"] = {sp.object_pose_on_table.orientation.x,
                            sp.object_pose_on_table.orientation.y,
                            sp.object_pose_on_table.orientation.z,
                            sp.object_pose_on_table.orientation.w};
    j["stable_poses"].push_back(p);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("object file: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace graspgen
