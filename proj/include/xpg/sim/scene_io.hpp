#pragma once

#include <json.hpp>

#include "xpg/sim/scene.hpp"

namespace xpg::sim {

inline constexpr int kSceneFormatVersion = 1;

nlohmann::json camera_to_json(const CameraPose& camera);
CameraPose camera_from_json(const nlohmann::json& j);

// Versioned snapshot; doubles round-trip exactly.
nlohmann::json scene_to_json(const SceneState& scene);
// Throws ConfigError on a version mismatch or malformed document.
SceneState scene_from_json(const nlohmann::json& j);

}  // namespace xpg::sim
