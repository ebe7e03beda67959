#include "graspgen/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>

#include "doctest.h"

using namespace graspgen;

namespace {

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("run_config: empty text yields defaults") {
  const RunConfig cfg = parse_run_config("");
  CHECK(cfg.seed == 1);
  CHECK(cfg.objects.empty());
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.primitive_target == 150);
  CHECK(cfg.extend_per_stable == 2000);
  CHECK(cfg.extend_noise == 0.0);
  CHECK(cfg.workers == 1);
  CHECK(cfg.threshold.kind == ThresholdPolicy::Kind::percentile);
  CHECK(cfg.threshold.value == 60.0);
  CHECK(cfg.poses_per_stable == 100);
  CHECK(cfg.sweep_points == 101);
  CHECK(cfg.workspace.lo.x == -0.4);
  CHECK(cfg.workspace.hi.z == 0.5);
  CHECK(cfg.hgg.epochs == 2000);
  CHECK(cfg.qgg.epochs == 2000);
}

TEST_CASE("run_config: full file parses into every field") {
  const std::string text = R"(# pipeline settings
[run]
seed = 2024
objects = pulley, bent_pipe
output_dir = results

[primitives]
target = 145

[extend]
per_stable = 200      # desk scale
noise_amplitude = 0.1
workers = 4

[hgg]
epochs = 1500
batch_size = 16
learning_rate = 0.002
kl_weight = 0.9
kl_warmup_frac = 0.25
kl_free_bits = 0.3

[qgg]
epochs = 1800

[threshold]
policy = fixed
value = 0.05

[trials]
poses_per_stable = 50

[workspace]
lo = -0.3 -0.3 0
hi = 0.3 0.3 0.4

[sweep]
points = 41
)";
  const RunConfig cfg = parse_run_config(text);
  CHECK(cfg.seed == 2024);
  REQUIRE(cfg.objects.size() == 2);
  CHECK(cfg.objects[0] == "pulley");
  CHECK(cfg.objects[1] == "bent_pipe");
  CHECK(cfg.output_dir == "results");
  CHECK(cfg.primitive_target == 145);
  CHECK(cfg.extend_per_stable == 200);
  CHECK(cfg.extend_noise == 0.1);
  CHECK(cfg.workers == 4);
  CHECK(cfg.hgg.epochs == 1500);
  CHECK(cfg.hgg.batch_size == 16);
  CHECK(cfg.hgg.learning_rate == 0.002);
  CHECK(cfg.hgg.kl_weight == 0.9);
  CHECK(cfg.hgg.kl_warmup_frac == 0.25);
  CHECK(cfg.hgg.kl_free_bits == 0.3);
  CHECK(cfg.qgg.epochs == 1800);
  CHECK(cfg.qgg.batch_size == 32);  // untouched default
  CHECK(cfg.threshold.kind == ThresholdPolicy::Kind::fixed);
  CHECK(cfg.threshold.value == 0.05);
  CHECK(cfg.poses_per_stable == 50);
  CHECK(cfg.workspace.lo.x == -0.3);
  CHECK(cfg.workspace.lo.z == 0.0);
  CHECK(cfg.workspace.hi.y == 0.3);
  CHECK(cfg.sweep_points == 41);
}

TEST_CASE("run_config: later assignments win") {
  const RunConfig cfg = parse_run_config("[run]\nseed = 1\nseed = 9\n");
  CHECK(cfg.seed == 9);
}

TEST_CASE("run_config: parse errors name the line") {
  auto err = [](const std::string& text) {
    return error_text([&] { (void)parse_run_config(text); });
  };
  CHECK(err("[nope]\n").find("line 1") != std::string::npos);
  CHECK(err("[nope]\n").find("unknown section") != std::string::npos);
  CHECK(err("[run]\nbogus = 1\n").find("line 2") != std::string::npos);
  CHECK(err("[run]\nbogus = 1\n").find("unknown key") != std::string::npos);
  CHECK(err("seed = 1\n").find("before any section") != std::string::npos);
  CHECK(err("[run\n").find("malformed section") != std::string::npos);
  CHECK(err("[run]\nseed\n").find("key = value") != std::string::npos);
  CHECK(err("[run]\n= 3\n").find("empty key") != std::string::npos);
  CHECK(err("[primitives]\ntarget = ten\n").find("integer") != std::string::npos);
  CHECK(err("[primitives]\ntarget = 0\n").find("out of range") != std::string::npos);
  CHECK(err("[run]\nseed = -4\n").find("seed") != std::string::npos);
  CHECK(err("[workspace]\nlo = 1 2\n").find("three numbers") != std::string::npos);
  CHECK(err("[workspace]\nlo = 1 2 3 4\n").find("three numbers") != std::string::npos);
  CHECK(err("[threshold]\npolicy = sometimes\n").find("policy") != std::string::npos);

  CHECK_THROWS_AS((void)parse_run_config("[extend]\nnoise_amplitude = 0.6\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_run_config("[threshold]\nvalue = 101\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)parse_run_config("[threshold]\npolicy = fixed\nvalue = -1\n"),
      std::invalid_argument);
  CHECK_THROWS_AS((void)parse_run_config("[hgg]\nlearning_rate = 0\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_run_config("[hgg]\nkl_warmup_frac = 1.5\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)parse_run_config("[workspace]\nlo = 1 0 0\nhi = 0 1 1\n"),
      std::invalid_argument);
  CHECK_THROWS_AS((void)parse_run_config("[sweep]\npoints = 1\n"),
                  std::invalid_argument);
}

TEST_CASE("run_config: file loading") {
  {
    std::ofstream out("rc_test.cfg", std::ios::binary);
    out << "[run]\nseed = 77\n";
  }
  const RunConfig cfg = load_run_config("rc_test.cfg");
  CHECK(cfg.seed == 77);
  std::remove("rc_test.cfg");
  CHECK_THROWS_AS((void)load_run_config("rc_missing.cfg"), std::invalid_argument);
}

TEST_CASE("run_config: object selection") {
  RunConfig cfg;
  const auto all = selected_objects(cfg);
  REQUIRE(all.size() == 3);
  CHECK(all[0] == "bent_pipe");
  CHECK(all[1] == "cinder_block");
  CHECK(all[2] == "pulley");

  cfg.objects = {"pulley", "bent_pipe", "pulley"};
  const auto picked = selected_objects(cfg);
  REQUIRE(picked.size() == 2);
  CHECK(picked[0] == "pulley");
  CHECK(picked[1] == "bent_pipe");

  cfg.objects = {"teapot"};
  CHECK_THROWS_AS((void)selected_objects(cfg), std::invalid_argument);
}

TEST_CASE("run_config: stage seeds are independent streams") {
  RunConfig a;
  a.seed = 5;
  RunConfig b;
  b.seed = 6;

  CHECK(stage_seed(a, "extend", "pulley") == stage_seed(a, "extend", "pulley"));
  CHECK(stage_seed(a, "extend", "pulley") != stage_seed(a, "extend", "bent_pipe"));
  CHECK(stage_seed(a, "extend", "pulley") != stage_seed(a, "trials", "pulley"));
  CHECK(stage_seed(a, "extend", "pulley") != stage_seed(b, "extend", "pulley"));
  CHECK(stage_seed(a, "ab", "c") != stage_seed(a, "a", "bc"));
}
