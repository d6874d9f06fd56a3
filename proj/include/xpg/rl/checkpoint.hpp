#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "xpg/rl/normalizer.hpp"
#include "xpg/rl/policy.hpp"

namespace xpg::rl {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string method;  // "xpg" or "flat_policy"
  std::string config_hash;
  std::uint64_t seed = 0;
  PolicyArchitecture architecture;
  PolicyParams params;
  bool normalize_obs = true;
  RunningNormalizer normalizer;
};

nlohmann::json architecture_to_json(const PolicyArchitecture& arch);
PolicyArchitecture architecture_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
// Throws ConfigError on a version mismatch or a malformed document.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws ConfigError if the file is missing or invalid.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xpg::rl
