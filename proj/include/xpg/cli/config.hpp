#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xpg/eval/env.hpp"
#include "xpg/eval/harness.hpp"
#include "xpg/rl/ppo.hpp"

namespace xpg::cli {

struct EvalSection {
  std::vector<std::string> methods{"xpg", "fixed_threshold", "flat_policy", "no_nbv"};
  std::vector<int> object_counts{5, 10, 15, 20};
  int n_scenes = 100;
  std::string family = "random";
  std::string reference_method = "fixed_threshold";
  bool include_failures = true;
  double fixed_tau1 = 0.5;
  double fixed_tau2 = 0.5;
};

struct PolicySection {
  std::string encoder = "features";  // or "conv"
  int hidden = 64;
};

struct TrainSection {
  bool mix_families = true;  // occluded family drawn with scene.occluded_prob
};

// Every field has a default; keys are dotted section paths.
struct RunConfig {
  sim::SceneConfig scene;
  sim::DynamicsConfig dynamics;
  grasp::OracleConfig oracle;
  decision::NbvConfig nbv;
  perception::PerceptionConfig perception;
  rl::PpoConfig ppo;
  PolicySection policy;
  TrainSection train;
  EvalSection eval;
  std::uint64_t seed = 0;
};

// Flat key -> raw value text from a TOML subset: [section] headers, dotted
// keys, strings, booleans, numbers and single-line arrays, # comments.
// Throws ConfigError with the line number on malformed input.
std::map<std::string, std::string> parse_toml(const std::string& text);

// Applies one value to its key. Strings may be given with or without quotes.
// Throws ConfigError for unknown keys or ill-typed values.
void set_value(RunConfig& config, const std::string& key, const std::string& value);

// "key=value" as given to --set.
void apply_override(RunConfig& config, const std::string& assignment);

RunConfig load_config(const std::filesystem::path& path);

// Semantic checks across keys. Throws ConfigError.
void validate(const RunConfig& config);

// Every key with its value, sorted by key, one "key = value" per line; this
// text reloads to the same configuration.
std::string canonical_dump(const RunConfig& config);
std::vector<std::string> known_keys();

// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

// Views of the config for the library modules.
eval::EnvConfig env_config(const RunConfig& config);
eval::BatchConfig batch_config(const RunConfig& config, int jobs);
rl::PolicyArchitecture architecture(const RunConfig& config, rl::HeadKind head);

}  // namespace xpg::cli
