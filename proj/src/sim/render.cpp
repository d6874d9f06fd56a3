#include "xpg/sim/render.hpp"

#include <array>

#include "xpg/kernels/kernels.hpp"

namespace xpg::sim {
namespace {

struct BoxBuffer {
  std::array<std::vector<double>, 6> bounds;
  std::vector<int> ids;

  void add(const ObjectInstance& o) {
    bounds[0].push_back(o.footprint.x0);
    bounds[1].push_back(o.footprint.x1);
    bounds[2].push_back(o.footprint.y0);
    bounds[3].push_back(o.footprint.y1);
    bounds[4].push_back(kTableZ);
    bounds[5].push_back(kTableZ + o.height);
    ids.push_back(o.id);
  }

  kernels::BoxesSoA view() const {
    return {bounds[0], bounds[1], bounds[2], bounds[3], bounds[4], bounds[5]};
  }
};

BoxBuffer live_boxes(const SceneState& scene) {
  BoxBuffer boxes;
  for (const auto& o : scene.objects)
    if (!o.removed) boxes.add(o);
  return boxes;
}

kernels::RayBundle bundle(const PixelRays& rays) {
  return {rays.origin.x, rays.origin.y, rays.origin.z, rays.dx, rays.dy, rays.dz};
}

}  // namespace

PixelRays pixel_rays(const CameraPose& camera) {
  const CameraFrame f = camera_frame(camera);
  const auto& in = camera.intrinsics;
  const std::size_t n = static_cast<std::size_t>(in.width) * in.height;
  PixelRays rays;
  rays.origin = camera.position;
  rays.dx.resize(n);
  rays.dy.resize(n);
  rays.dz.resize(n);
  for (int v = 0; v < in.height; ++v) {
    const double b = (v + 0.5 - 0.5 * in.height) / in.focal;
    for (int u = 0; u < in.width; ++u) {
      const double a = (u + 0.5 - 0.5 * in.width) / in.focal;
      const Vec3 d = f.forward + a * f.right + b * f.down;
      const std::size_t i = static_cast<std::size_t>(v) * in.width + u;
      rays.dx[i] = d.x;
      rays.dy[i] = d.y;
      rays.dz[i] = d.z;
    }
  }
  return rays;
}

std::vector<double> table_depths(const PixelRays& rays) {
  std::vector<double> t(rays.dz.size(), kFarDepth);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (rays.dz[i] < 0.0) {
      const double hit = (kTableZ - rays.origin.z) / rays.dz[i];
      if (hit < kFarDepth) t[i] = hit;
    }
  }
  return t;
}

DepthRender render(const SceneState& scene, const CameraPose& camera) {
  const PixelRays rays = pixel_rays(camera);
  const BoxBuffer boxes = live_boxes(scene);
  DepthRender out;
  out.width = camera.intrinsics.width;
  out.height = camera.intrinsics.height;
  out.depth = table_depths(rays);
  std::vector<std::int32_t> hit(out.depth.size(), -1);
  kernels::cast_rays(bundle(rays), boxes.view(), {out.depth, hit, {}});
  out.instance.resize(hit.size());
  for (std::size_t i = 0; i < hit.size(); ++i)
    out.instance[i] = hit[i] < 0 ? kBackground : boxes.ids[static_cast<std::size_t>(hit[i])];
  return out;
}

std::vector<std::pair<int, std::int64_t>> projection_counts(const SceneState& scene,
                                                            const CameraPose& camera) {
  const PixelRays rays = pixel_rays(camera);
  const BoxBuffer boxes = live_boxes(scene);
  std::vector<double> t = table_depths(rays);
  std::vector<std::int32_t> hit(t.size(), -1);
  std::vector<std::int64_t> counts(boxes.ids.size(), 0);
  kernels::cast_rays(bundle(rays), boxes.view(), {t, hit, counts});
  std::vector<std::pair<int, std::int64_t>> result;
  std::size_t k = 0;
  for (const auto& o : scene.objects) {
    if (o.removed) {
      result.emplace_back(o.id, 0);
    } else {
      result.emplace_back(o.id, counts[k++]);
    }
  }
  return result;
}

}  // namespace xpg::sim
