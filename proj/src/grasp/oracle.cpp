#include "xpg/grasp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace xpg::grasp {

double clearance(const sim::SceneState& scene, const sim::ObjectInstance& object, double radius) {
  if (!(radius > 0.0)) return 1.0;
  const sim::Rect own = object.footprint;
  const sim::Rect ring = own.expanded(radius);
  std::vector<sim::Rect> others;
  for (const auto& o : scene.objects) {
    if (o.removed || o.id == object.id) continue;
    const sim::Rect c = sim::intersection(o.footprint, ring);
    if (c.area() > 0.0) others.push_back(c);
  }
  const double ring_area = ring.area() - own.area();
  if (others.empty() || !(ring_area > 0.0)) return 1.0;

  std::vector<double> xs{ring.x0, ring.x1, own.x0, own.x1};
  std::vector<double> ys{ring.y0, ring.y1, own.y0, own.y1};
  for (const auto& r : others) {
    xs.insert(xs.end(), {r.x0, r.x1});
    ys.insert(ys.end(), {r.y0, r.y1});
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  double covered = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double mx = 0.5 * (xs[i] + xs[i + 1]);
    if (mx < ring.x0 || mx > ring.x1) continue;
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double my = 0.5 * (ys[j] + ys[j + 1]);
      if (my < ring.y0 || my > ring.y1) continue;
      if (own.contains(mx, my)) continue;
      for (const auto& r : others) {
        if (r.contains(mx, my)) {
          covered += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
          break;
        }
      }
    }
  }
  return std::clamp(1.0 - covered / ring_area, 0.0, 1.0);
}

double object_score(double visibility, double clear, const OracleConfig& config) {
  if (!(visibility > 0.0)) return 0.0;
  const double s = std::pow(std::clamp(visibility, 0.0, 1.0), config.alpha) *
                   std::pow(std::clamp(clear, 0.0, 1.0), config.beta);
  return std::clamp(s, 0.0, 1.0);
}

GraspScores score_scene(const sim::SceneState& scene, const sim::DepthRender& render,
                        const OracleConfig& config) {
  std::map<int, std::int64_t> visible;
  for (int id : render.instance)
    if (id != sim::kBackground) ++visible[id];

  const auto projected = sim::projection_counts(scene, scene.camera);
  const int target_id = scene.target_id();

  std::set<int> eligible;
  if (config.strict_occluders) {
    sim::SceneState alone = scene;
    for (auto& o : alone.objects) o.removed = o.removed || o.id != target_id;
    const sim::DepthRender target_only = sim::render(alone, scene.camera);
    for (std::size_t i = 0; i < render.instance.size(); ++i) {
      const int id = render.instance[i];
      if (target_only.instance[i] == target_id && id != target_id && id != sim::kBackground)
        eligible.insert(id);
    }
  } else {
    for (const auto& [id, n] : visible)
      if (id != target_id) eligible.insert(id);
  }

  GraspScores scores;
  for (const auto& [id, proj] : projected) {
    const sim::ObjectInstance* obj = scene.find(id);
    if (obj == nullptr || obj->removed) continue;
    const auto it = visible.find(id);
    const double vis_px = it == visible.end() ? 0.0 : static_cast<double>(it->second);
    const double vis = proj > 0 ? vis_px / static_cast<double>(proj) : 0.0;
    const double clear = clearance(scene, *obj, config.clearance_radius);
    scores.per_object[id] = object_score(vis, clear, config);
    if (id == target_id) scores.target_clearance = clear;
  }
  if (const auto it = scores.per_object.find(target_id); it != scores.per_object.end())
    scores.q_target = it->second;
  for (int id : eligible) {
    const double q = scores.per_object.at(id);
    if (!scores.best_occluder || q > scores.q_occlude) {
      scores.q_occlude = q;
      scores.best_occluder = id;
    }
  }
  return scores;
}

}  // namespace xpg::grasp
