#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graspgen/objects.hpp"
#include "graspgen/pipeline.hpp"
#include "graspgen/vae.hpp"

namespace graspgen {

/// Settings for one full pipeline run, covering every stage. Parsed from
/// a sectioned key = value text file; every field keeps a workable
/// default so an empty file is a valid configuration.
struct RunConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> objects;  // empty selects every builtin object
  std::string output_dir = "out";

  int primitive_target = 150;

  int extend_per_stable = 2000;
  double extend_noise = 0.0;  // label noise amplitude, 0 disables
  int workers = 1;

  TrainConfig hgg;
  TrainConfig qgg;

  ThresholdPolicy threshold;  // percentile(60)

  int poses_per_stable = 100;
  Aabb workspace{{-0.4, -0.4, -0.02}, {0.4, 0.4, 0.5}};

  int sweep_points = 101;
};

/// Parses configuration text. Sections: [run], [primitives], [extend],
/// [hgg], [qgg], [threshold], [trials], [workspace], [sweep]. Unknown
/// sections or keys, malformed lines, and out-of-range values throw
/// std::invalid_argument naming the offending line. Later assignments to
/// the same key win.
RunConfig parse_run_config(const std::string& text);

/// Reads and parses a configuration file.
RunConfig load_run_config(const std::string& path);

/// Resolves the object selection: the configured list (validated against
/// the builtins, duplicates dropped), or every builtin when empty.
std::vector<std::string> selected_objects(const RunConfig& cfg);

/// Deterministic seed for one stage of one object's pipeline, derived
/// from the run seed so stages and objects get independent streams.
std::uint64_t stage_seed(const RunConfig& cfg, std::string_view stage,
                         std::string_view object);

}  // namespace graspgen
