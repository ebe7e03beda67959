#include "graspgen/run_config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "graspgen/rng.hpp"

namespace graspgen {
namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

bool parse_ll(const std::string& s, long long& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end && *end == '\0';
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtoull(s.c_str(), &end, 10);
  return errno == 0 && end && *end == '\0';
}

bool parse_f64(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end && *end == '\0';
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    std::string t = trim(cur);
    if (!t.empty()) items.push_back(t);
  }
  return items;
}

bool known_section(const std::string& s) {
  return s == "run" || s == "primitives" || s == "extend" || s == "hgg" ||
         s == "qgg" || s == "threshold" || s == "trials" || s == "workspace" ||
         s == "sweep";
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;

  auto fail = [&lineno](const std::string& what) {
    throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + what);
  };
  auto want_int = [&](const std::string& value, int lo) {
    long long v = 0;
    if (!parse_ll(value, v)) fail("expected an integer, got '" + value + "'");
    if (v < lo || v > 1000000000) fail("value " + value + " out of range");
    return static_cast<int>(v);
  };
  auto want_f64 = [&](const std::string& value) {
    double v = 0;
    if (!parse_f64(value, v)) fail("expected a number, got '" + value + "'");
    return v;
  };
  auto want_vec3 = [&](const std::string& value) {
    std::istringstream vs(value);
    std::string a, b, c, extra;
    if (!(vs >> a >> b >> c) || (vs >> extra)) {
      fail("expected three numbers, got '" + value + "'");
    }
    return Vec3{want_f64(a), want_f64(b), want_f64(c)};
  };
  auto train_key = [&](TrainConfig& tc, const std::string& key, const std::string& value) {
    if (key == "epochs") tc.epochs = want_int(value, 1);
    else if (key == "batch_size") tc.batch_size = want_int(value, 1);
    else if (key == "learning_rate") tc.learning_rate = want_f64(value);
    else if (key == "kl_weight") tc.kl_weight = want_f64(value);
    else if (key == "kl_warmup_frac") tc.kl_warmup_frac = want_f64(value);
    else if (key == "kl_free_bits") tc.kl_free_bits = want_f64(value);
    else return false;
    return true;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) fail("unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (section.empty()) fail("key '" + key + "' appears before any section");

    if (section == "run") {
      if (key == "seed") {
        if (!parse_u64(value, cfg.seed)) fail("expected a non-negative integer seed");
      } else if (key == "objects") {
        cfg.objects = split_list(value);
      } else if (key == "output_dir") {
        if (value.empty()) fail("output_dir must not be empty");
        cfg.output_dir = value;
      } else {
        fail("unknown key '" + key + "' in [run]");
      }
    } else if (section == "primitives") {
      if (key == "target") cfg.primitive_target = want_int(value, 1);
      else fail("unknown key '" + key + "' in [primitives]");
    } else if (section == "extend") {
      if (key == "per_stable") cfg.extend_per_stable = want_int(value, 1);
      else if (key == "noise_amplitude") cfg.extend_noise = want_f64(value);
      else if (key == "workers") cfg.workers = want_int(value, 1);
      else fail("unknown key '" + key + "' in [extend]");
    } else if (section == "hgg") {
      if (!train_key(cfg.hgg, key, value)) fail("unknown key '" + key + "' in [hgg]");
    } else if (section == "qgg") {
      if (!train_key(cfg.qgg, key, value)) fail("unknown key '" + key + "' in [qgg]");
    } else if (section == "threshold") {
      if (key == "policy") {
        if (value == "fixed") cfg.threshold.kind = ThresholdPolicy::Kind::fixed;
        else if (value == "percentile") cfg.threshold.kind = ThresholdPolicy::Kind::percentile;
        else fail("policy must be 'fixed' or 'percentile', got '" + value + "'");
      } else if (key == "value") {
        cfg.threshold.value = want_f64(value);
      } else {
        fail("unknown key '" + key + "' in [threshold]");
      }
    } else if (section == "trials") {
      if (key == "poses_per_stable") cfg.poses_per_stable = want_int(value, 1);
      else fail("unknown key '" + key + "' in [trials]");
    } else if (section == "workspace") {
      if (key == "lo") cfg.workspace.lo = want_vec3(value);
      else if (key == "hi") cfg.workspace.hi = want_vec3(value);
      else fail("unknown key '" + key + "' in [workspace]");
    } else if (section == "sweep") {
      if (key == "points") cfg.sweep_points = want_int(value, 2);
      else fail("unknown key '" + key + "' in [sweep]");
    }
  }

  auto invalid = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (cfg.extend_noise < 0.0 || cfg.extend_noise > 0.5) {
    invalid("noise_amplitude must lie in [0, 0.5]");
  }
  for (const TrainConfig* tc : {&cfg.hgg, &cfg.qgg}) {
    if (!(tc->learning_rate > 0.0)) invalid("learning_rate must be positive");
    if (tc->kl_weight < 0.0) invalid("kl_weight must be non-negative");
    if (tc->kl_warmup_frac < 0.0 || tc->kl_warmup_frac > 1.0) {
      invalid("kl_warmup_frac must lie in [0, 1]");
    }
    if (tc->kl_free_bits < 0.0) invalid("kl_free_bits must be non-negative");
  }
  if (cfg.threshold.kind == ThresholdPolicy::Kind::percentile) {
    if (cfg.threshold.value < 0.0 || cfg.threshold.value > 100.0) {
      invalid("percentile must lie in [0, 100]");
    }
  } else if (cfg.threshold.value < 0.0) {
    invalid("fixed threshold must be non-negative");
  }
  if (cfg.workspace.lo.x > cfg.workspace.hi.x || cfg.workspace.lo.y > cfg.workspace.hi.y ||
      cfg.workspace.lo.z > cfg.workspace.hi.z) {
    invalid("workspace lo must not exceed hi");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument(path + ": cannot open configuration file");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_run_config(os.str());
}

std::vector<std::string> selected_objects(const RunConfig& cfg) {
  std::vector<std::string> names;
  if (cfg.objects.empty()) {
    for (const SdfObject& obj : builtin_objects()) names.push_back(obj.name);
    return names;
  }
  for (const std::string& name : cfg.objects) {
    (void)builtin_object(name);  // throws for unknown names
    bool seen = false;
    for (const std::string& n : names) seen = seen || n == name;
    if (!seen) names.push_back(name);
  }
  return names;
}

std::uint64_t stage_seed(const RunConfig& cfg, std::string_view stage,
                         std::string_view object) {
  // FNV-1a over "stage\0object" gives the stream tag.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h *= 1099511628211ULL;  // separator so ("ab","c") != ("a","bc")
  };
  mix(stage);
  mix(object);
  return derive_seed(cfg.seed, h);
}

}  // namespace graspgen
