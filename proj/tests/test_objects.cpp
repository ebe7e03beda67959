#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "graspgen/objects.hpp"
#include "graspgen/rng.hpp"

using namespace graspgen;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Independent box distance: clamp to the box for outside points, largest
// inside margin for inside points.
double box_distance_oracle(const Vec3& he, const Vec3& p) {
  Vec3 c{std::clamp(p.x, -he.x, he.x), std::clamp(p.y, -he.y, he.y),
         std::clamp(p.z, -he.z, he.z)};
  double outside = norm(p - c);
  if (outside > 0.0) return outside;
  double mx = he.x - std::abs(p.x);
  double my = he.y - std::abs(p.y);
  double mz = he.z - std::abs(p.z);
  return -std::min(mx, std::min(my, mz));
}
}  // namespace

TEST_CASE("box sdf matches the clamp-projection oracle") {
  SdfNode box{SdfBox{{0.05, 0.03, 0.02}}};
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    Vec3 p{rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15)};
    CHECK(sdf_eval(box, p) ==
          doctest::Approx(box_distance_oracle({0.05, 0.03, 0.02}, p)).epsilon(1e-12));
  }
}

TEST_CASE("cylinder sdf has exact values at probe points") {
  SdfNode cyl{SdfCylinder{0.04, 0.03}};
  CHECK(sdf_eval(cyl, {0, 0, 0}) == doctest::Approx(-0.03));         // cap is nearest
  CHECK(sdf_eval(cyl, {0.1, 0, 0}) == doctest::Approx(0.06));        // radial outside
  CHECK(sdf_eval(cyl, {0, 0, 0.08}) == doctest::Approx(0.05));       // above the cap
  CHECK(sdf_eval(cyl, {0.07, 0, 0.07}) ==
        doctest::Approx(std::sqrt(0.03 * 0.03 + 0.04 * 0.04)));      // edge distance
  CHECK(sdf_eval(cyl, {0.039, 0, 0.0}) == doctest::Approx(-0.001));  // just inside the wall
}

TEST_CASE("capsule sdf equals segment distance minus radius") {
  Vec3 a{-0.05, 0, 0}, b{0.05, 0, 0};
  SdfNode cap{SdfCapsule{a, b, 0.02}};
  Rng rng(22);
  for (int i = 0; i < 1000; ++i) {
    Vec3 p{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    // Independent route: distance to the closed segment by endpoint cases.
    double t = (p.x - a.x) / (b.x - a.x);
    Vec3 nearest = t <= 0 ? a : (t >= 1 ? b : Vec3{p.x, 0, 0});
    CHECK(sdf_eval(cap, p) == doctest::Approx(norm(p - nearest) - 0.02).epsilon(1e-12));
  }
}

TEST_CASE("torus segment sdf at characteristic points") {
  // Quarter arc about +y, major 0.05, minor 0.01.
  SdfNode seg{SdfTorusSegment{0.05, 0.01, kPi / 2}};
  // On the tube axis mid-arc.
  CHECK(sdf_eval(seg, {0, 0.05, 0}) == doctest::Approx(-0.01));
  // At the frame origin: distance is the major radius minus tube radius.
  CHECK(sdf_eval(seg, {0, 0, 0}) == doctest::Approx(0.04));
  // On the arc end (45 degrees): still on the tube axis.
  double s = 0.05 / std::sqrt(2.0);
  CHECK(sdf_eval(seg, {s, s, 0}) == doctest::Approx(-0.01));
  // Beyond the cap: distance to the end-circle center, minus minor radius.
  Vec3 beyond{0.05, 0, 0};
  double want = norm(beyond - Vec3{s, s, 0}) - 0.01;
  CHECK(sdf_eval(seg, beyond) == doctest::Approx(want).epsilon(1e-12));
  // Full-circle arc reduces to the plain torus formula.
  SdfNode full{SdfTorusSegment{0.05, 0.01, 2 * kPi}};
  CHECK(sdf_eval(full, {-0.05, 0, 0}) == doctest::Approx(-0.01));
  CHECK(sdf_eval(full, {0, -0.05, 0.01}) == doctest::Approx(0.0));
}

TEST_CASE("union is the pointwise minimum of children") {
  auto mk = [](SdfNode&& n) { return std::make_shared<const SdfNode>(std::move(n)); };
  auto a = mk(SdfNode{SdfBox{{0.02, 0.02, 0.02}}});
  auto b = mk(SdfNode{SdfPosed{Pose{{0.1, 0, 0}, Quat{}}, mk(SdfNode{SdfCylinder{0.01, 0.05}})}});
  SdfNode u{SdfUnion{{a, b}}};
  Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    Vec3 p{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    CHECK(sdf_eval(u, p) == doctest::Approx(std::min(sdf_eval(*a, p), sdf_eval(*b, p))));
  }
}

TEST_CASE("difference carves the cut out of the base") {
  auto mk = [](SdfNode&& n) { return std::make_shared<const SdfNode>(std::move(n)); };
  SdfNode diff{SdfDifference{mk(SdfNode{SdfBox{{0.05, 0.05, 0.05}}}),
                             mk(SdfNode{SdfCylinder{0.02, 0.1}})}};
  CHECK(sdf_eval(diff, {0, 0, 0}) > 0.0);        // inside the cut: removed
  CHECK(sdf_eval(diff, {0.04, 0, 0}) < 0.0);     // in base, outside cut: solid
  CHECK(sdf_eval(diff, {0.2, 0, 0}) > 0.0);      // outside everything
  CHECK(sdf_eval(diff, {0.019, 0, 0}) == doctest::Approx(0.001));  // wall of the bore
}

TEST_CASE("posed nodes evaluate in the child frame") {
  auto mk = [](SdfNode&& n) { return std::make_shared<const SdfNode>(std::move(n)); };
  Pose pose{{0.1, 0.2, 0.3}, quat_from_axis_angle({0, 0, 1}, kPi / 2)};
  SdfNode posed{SdfPosed{pose, mk(SdfNode{SdfBox{{0.03, 0.01, 0.01}}})}};
  // The box's +x corner region maps to +y in the parent frame.
  CHECK(sdf_eval(posed, {0.1, 0.23, 0.3}) == doctest::Approx(0.0));
  CHECK(sdf_eval(posed, {0.1, 0.2, 0.3}) == doctest::Approx(-0.01));
}

TEST_CASE("surface normals are unit and match analytic directions") {
  SdfNode cap{SdfCapsule{{0, 0, -0.03}, {0, 0, 0.03}, 0.02}};
  // Point on the cylindrical part of the capsule: radial normal.
  Vec3 p{0.02, 0, 0.01};
  Vec3 n = sdf_normal(cap, p);
  CHECK(norm(n) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(n.x == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(n.y) < 1e-4);
  CHECK(std::abs(n.z) < 1e-4);
  // On the top spherical cap: radial from the segment end.
  Vec3 q{0.0, 0.012, 0.03 + 0.016};
  Vec3 nq = sdf_normal(cap, q);
  Vec3 want = normalized(q - Vec3{0, 0, 0.03});
  CHECK(nq.x == doctest::Approx(want.x).epsilon(1e-4));
  CHECK(nq.y == doctest::Approx(want.y).epsilon(1e-4));
  CHECK(nq.z == doctest::Approx(want.z).epsilon(1e-4));
}

TEST_CASE("builtin objects have the expected stable pose counts") {
  auto objs = builtin_objects();
  REQUIRE(objs.size() == 3);
  CHECK(objs[0].name == "bent_pipe");
  CHECK(objs[0].stable_poses.size() == 2);
  CHECK(objs[1].name == "cinder_block");
  CHECK(objs[1].stable_poses.size() == 3);
  CHECK(objs[2].name == "pulley");
  CHECK(objs[2].stable_poses.size() == 2);
  for (const auto& o : objs) {
    CHECK(o.mass_kg > 0.0);
    // Desk scale: bounding box diagonal between 5 and 40 cm.
    Aabb b = sdf_bounds(*o.root);
    double diag = norm(b.hi - b.lo);
    CHECK(diag > 0.05);
    CHECK(diag < 0.40);
  }
}

TEST_CASE("builtin stable poses rest on the table without sinking") {
  for (const auto& obj : builtin_objects()) {
    for (const auto& sp : obj.stable_poses) {
      CAPTURE(obj.name);
      CAPTURE(sp.id);
      double clearance = stable_pose_clearance(obj, sp);
      CHECK(clearance >= -1e-4);
      // And the object actually touches the table (within the grid step).
      CHECK(clearance < 0.006);
      // Plane normal is unit and points into free space: a point far above
      // the table (in table frame) must have large positive height.
      const PlaneEq& pl = sp.tabletop_plane_obj;
      CHECK(std::sqrt(pl.a * pl.a + pl.b * pl.b + pl.c * pl.c) == doctest::Approx(1.0));
      Pose table_in_obj = pose_inverse(sp.object_pose_on_table);
      Vec3 high = pose_apply(table_in_obj, {0, 0, 1.0});
      CHECK(plane_eval(pl, high) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("object json round trip preserves geometry and poses") {
  std::string path = "roundtrip_object.json";
  for (const auto& obj : builtin_objects()) {
    save_object_json(obj, path);
    SdfObject back = load_object_json(path);
    CHECK(back.name == obj.name);
    CHECK(back.mass_kg == doctest::Approx(obj.mass_kg));
    REQUIRE(back.stable_poses.size() == obj.stable_poses.size());
    for (size_t i = 0; i < obj.stable_poses.size(); ++i) {
      CHECK(back.stable_poses[i].id == obj.stable_poses[i].id);
      CHECK(norm(back.stable_poses[i].object_pose_on_table.position -
                 obj.stable_poses[i].object_pose_on_table.position) < 1e-12);
    }
    Rng rng(24);
    for (int i = 0; i < 500; ++i) {
      Vec3 p{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
      CHECK(object_sdf(back, p) == doctest::Approx(object_sdf(obj, p)).epsilon(1e-12));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("malformed object files are rejected with clear errors") {
  auto write_and_try = [](const std::string& text) {
    std::string path = "bad_object.json";
    std::ofstream out(path);
    out << text;
    out.close();
    bool threw = false;
    std::string msg;
    try {
      load_object_json(path);
    } catch (const std::runtime_error& e) {
      threw = true;
      msg = e.what();
    }
    std::remove(path.c_str());
    CHECK(threw);
    return msg;
  };

  // Truncated JSON.
  CHECK(write_and_try("{\"format\": \"graspgen-object\"").find("parse") != std::string::npos);
  // Wrong format tag.
  write_and_try("{\"format\": \"other\", \"version\": 1}");
  // Negative dimension.
  std::string neg = R"({"format":"graspgen-object","version":1,"name":"x","mass_kg":1,
    "root":{"type":"box","half_extents":[-0.1,0.1,0.1]},
    "stable_poses":[{"id":0,"position":[0,0,0.1],"quaternion_xyzw":[0,0,0,1]}]})";
  CHECK(write_and_try(neg).find("positive") != std::string::npos);
  // Non-unit quaternion.
  std::string badq = R"({"format":"graspgen-object","version":1,"name":"x","mass_kg":1,
    "root":{"type":"box","half_extents":[0.1,0.1,0.1]},
    "stable_poses":[{"id":0,"position":[0,0,0.1],"quaternion_xyzw":[0,0,0,2]}]})";
  CHECK(write_and_try(badq).find("unit") != std::string::npos);
  // Stable pose that sinks the object below the table.
  std::string sunk = R"({"format":"graspgen-object","version":1,"name":"x","mass_kg":1,
    "root":{"type":"box","half_extents":[0.1,0.1,0.1]},
    "stable_poses":[{"id":0,"position":[0,0,0.02],"quaternion_xyzw":[0,0,0,1]}]})";
  CHECK(write_and_try(sunk).find("sinks") != std::string::npos);
  // Duplicate stable pose ids.
  std::string dup = R"({"format":"graspgen-object","version":1,"name":"x","mass_kg":1,
    "root":{"type":"box","half_extents":[0.1,0.1,0.1]},
    "stable_poses":[{"id":0,"position":[0,0,0.1],"quaternion_xyzw":[0,0,0,1]},
                    {"id":0,"position":[0,0,0.1],"quaternion_xyzw":[0,0,0,1]}]})";
  CHECK(write_and_try(dup).find("duplicate") != std::string::npos);
}

TEST_CASE("occupied grid points find the object in a shifted frame") {
  SdfObject obj = builtin_object("pulley");
  // Scan in the table frame of the flat pose.
  Pose table_to_obj = pose_inverse(obj.stable_poses[0].object_pose_on_table);
  auto pts = occupied_grid_points(obj, table_to_obj, {{-0.06, -0.06, 0.0}, {0.06, 0.06, 0.06}},
                                  0.005);
  REQUIRE(!pts.empty());
  double zmax = 0.0;
  for (const auto& p : pts) {
    CHECK(p.z >= -1e-9);  // nothing below the table
    zmax = std::max(zmax, p.z);
  }
  // Pulley is 55 mm tall, grid step 5 mm.
  CHECK(zmax == doctest::Approx(0.055).epsilon(0.1));
}
