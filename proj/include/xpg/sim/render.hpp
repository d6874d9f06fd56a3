#pragma once

#include <cstdint>
#include <vector>

#include "xpg/sim/scene.hpp"

namespace xpg::sim {

// Table plane height; objects stand on it.
inline constexpr double kTableZ = 0.0;
// Depth assigned to rays that never reach the table.
inline constexpr double kFarDepth = 10.0;

// Row-major H x W images. depth holds camera z-depth in meters.
struct DepthRender {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<int> instance;

  double depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  int instance_at(int u, int v) const { return instance[static_cast<std::size_t>(v) * width + u]; }

  friend bool operator==(const DepthRender&, const DepthRender&) = default;
};

// Per-pixel ray directions for a pose (forward-normalized, so the ray
// parameter equals z-depth).
struct PixelRays {
  Vec3 origin;
  std::vector<double> dx, dy, dz;
};

PixelRays pixel_rays(const CameraPose& camera);

// Z-depth at which each pixel ray meets the table (kFarDepth if it never does).
std::vector<double> table_depths(const PixelRays& rays);

DepthRender render(const SceneState& scene, const CameraPose& camera);

// Pixels each object would cover with every other object removed, keyed by
// object id. Removed objects report 0.
std::vector<std::pair<int, std::int64_t>> projection_counts(const SceneState& scene,
                                                            const CameraPose& camera);

}  // namespace xpg::sim
