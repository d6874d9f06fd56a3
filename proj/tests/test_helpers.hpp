#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "xpg/sim/render.hpp"
#include "xpg/sim/scene.hpp"

namespace testing {

inline xpg::sim::ObjectInstance box(int id, double x0, double y0, double x1, double y1, double h,
                                    bool target = false) {
  xpg::sim::ObjectInstance o;
  o.id = id;
  o.footprint = {x0, y0, x1, y1};
  o.height = h;
  o.is_target = target;
  return o;
}

inline xpg::sim::SceneState scene_of(std::vector<xpg::sim::ObjectInstance> objects,
                                     xpg::sim::CameraPose camera = {}) {
  xpg::sim::SceneState s;
  s.objects = std::move(objects);
  s.camera = camera;
  s.rng_seed = 99;
  return s;
}

inline xpg::sim::CameraPose top_down(double height = 0.6, int size = 64, double focal = 64.0) {
  xpg::sim::CameraPose c;
  c.position = {0.0, 0.0, height};
  c.look_at = {0.0, 0.0, 0.0};
  c.intrinsics = {focal, size, size};
  return c;
}

// Ray direction for pixel (u, v), written out independently of the renderer.
inline xpg::sim::Vec3 pixel_dir(const xpg::sim::CameraPose& cam, int u, int v) {
  using namespace xpg::sim;
  const Vec3 fwd = normalized(cam.look_at - cam.position);
  Vec3 right = cross(fwd, Vec3{0, 0, 1});
  right = norm(right) < 1e-9 ? Vec3{1, 0, 0} : normalized(right);
  const Vec3 down = cross(fwd, right);
  const double a = (u + 0.5 - cam.intrinsics.width / 2.0) / cam.intrinsics.focal;
  const double b = (v + 0.5 - cam.intrinsics.height / 2.0) / cam.intrinsics.focal;
  return fwd + a * right + b * down;
}

struct OracleHit {
  int id = 0;
  double t = 0.0;
};

// Nearest live box along the pixel ray, else the table.
inline OracleHit oracle_ray(const xpg::sim::SceneState& scene, const xpg::sim::CameraPose& cam,
                            int u, int v) {
  using namespace xpg::sim;
  const Vec3 o = cam.position;
  const Vec3 d = pixel_dir(cam, u, v);
  OracleHit best{0, d.z < 0 ? -o.z / d.z : kFarDepth};
  if (best.t > kFarDepth) best.t = kFarDepth;
  for (const auto& obj : scene.objects) {
    if (obj.removed) continue;
    const double lo[3] = {obj.footprint.x0, obj.footprint.y0, 0.0};
    const double hi[3] = {obj.footprint.x1, obj.footprint.y1, obj.height};
    const double oo[3] = {o.x, o.y, o.z};
    const double dd[3] = {d.x, d.y, d.z};
    double tn = -std::numeric_limits<double>::infinity(), tf = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int k = 0; k < 3; ++k) {
      if (dd[k] == 0.0) {
        if (oo[k] < lo[k] || oo[k] > hi[k]) miss = true;
        continue;
      }
      double a = (lo[k] - oo[k]) / dd[k], b = (hi[k] - oo[k]) / dd[k];
      if (a > b) std::swap(a, b);
      tn = std::max(tn, a);
      tf = std::min(tf, b);
    }
    if (miss || tn > tf || tf <= 0) continue;
    const double t = std::max(tn, 0.0);
    if (t < best.t) best = {obj.id, t};
  }
  return best;
}

}  // namespace testing
