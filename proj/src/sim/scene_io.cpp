#include "xpg/sim/scene_io.hpp"

#include "xpg/core/errors.hpp"

namespace xpg::sim {

using nlohmann::json;

json camera_to_json(const CameraPose& c) {
  return {{"position", {c.position.x, c.position.y, c.position.z}},
          {"look_at", {c.look_at.x, c.look_at.y, c.look_at.z}},
          {"focal", c.intrinsics.focal},
          {"width", c.intrinsics.width},
          {"height", c.intrinsics.height}};
}

CameraPose camera_from_json(const json& j) {
  CameraPose c;
  const auto& p = j.at("position");
  const auto& l = j.at("look_at");
  c.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
  c.look_at = {l.at(0).get<double>(), l.at(1).get<double>(), l.at(2).get<double>()};
  c.intrinsics.focal = j.at("focal").get<double>();
  c.intrinsics.width = j.at("width").get<int>();
  c.intrinsics.height = j.at("height").get<int>();
  return c;
}

json scene_to_json(const SceneState& s) {
  json objects = json::array();
  for (const auto& o : s.objects) {
    objects.push_back({{"id", o.id},
                       {"footprint", {o.footprint.x0, o.footprint.y0, o.footprint.x1, o.footprint.y1}},
                       {"height", o.height},
                       {"is_target", o.is_target},
                       {"removed", o.removed}});
  }
  return {{"version", kSceneFormatVersion},
          {"workspace", s.workspace},
          {"camera", camera_to_json(s.camera)},
          {"step_count", s.step_count},
          {"rng_seed", s.rng_seed},
          {"success", s.success},
          {"objects", std::move(objects)}};
}

SceneState scene_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kSceneFormatVersion)
      throw ConfigError("unsupported scene snapshot version " + j.at("version").dump());
    SceneState s;
    s.workspace = j.at("workspace").get<double>();
    s.camera = camera_from_json(j.at("camera"));
    s.step_count = j.at("step_count").get<int>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.success = j.at("success").get<bool>();
    for (const auto& jo : j.at("objects")) {
      ObjectInstance o;
      o.id = jo.at("id").get<int>();
      const auto& f = jo.at("footprint");
      o.footprint = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>(),
                     f.at(3).get<double>()};
      o.height = jo.at("height").get<double>();
      o.is_target = jo.at("is_target").get<bool>();
      o.removed = jo.at("removed").get<bool>();
      s.objects.push_back(o);
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scene snapshot: ") + e.what());
  }
}

}  // namespace xpg::sim
