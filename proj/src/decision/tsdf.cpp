#include "xpg/decision/tsdf.hpp"

#include <algorithm>
#include <limits>

#include "xpg/kernels/kernels.hpp"

namespace xpg::decision {

TsdfGrid TsdfGrid::make(sim::Vec3 origin, double voxel_size, std::array<int, 3> dims,
                        double truncation, double weight_cap) {
  TsdfGrid g;
  g.origin = origin;
  g.voxel_size = voxel_size;
  g.dims = dims;
  g.truncation = truncation;
  g.weight_cap = weight_cap;
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  g.values.assign(n, 0.0);
  g.weights.assign(n, 0.0);
  return g;
}

sim::Vec3 TsdfGrid::center(int ix, int iy, int iz) const {
  return {origin.x + (ix + 0.5) * voxel_size, origin.y + (iy + 0.5) * voxel_size,
          origin.z + (iz + 0.5) * voxel_size};
}

bool TsdfGrid::empty_of_observations() const {
  return std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; });
}

void integrate_into(TsdfGrid& grid, std::span<const double> depth, const sim::CameraPose& camera) {
  const sim::CameraFrame f = sim::camera_frame(camera);
  kernels::ProjectionParams p{};
  p.cam[0] = camera.position.x;
  p.cam[1] = camera.position.y;
  p.cam[2] = camera.position.z;
  p.right[0] = f.right.x, p.right[1] = f.right.y, p.right[2] = f.right.z;
  p.down[0] = f.down.x, p.down[1] = f.down.y, p.down[2] = f.down.z;
  p.forward[0] = f.forward.x, p.forward[1] = f.forward.y, p.forward[2] = f.forward.z;
  p.focal = camera.intrinsics.focal;
  p.cx = 0.5 * camera.intrinsics.width;
  p.cy = 0.5 * camera.intrinsics.height;
  p.width = camera.intrinsics.width;
  p.height = camera.intrinsics.height;
  kernels::VolumeParams v{};
  v.origin[0] = grid.origin.x;
  v.origin[1] = grid.origin.y;
  v.origin[2] = grid.origin.z;
  v.voxel_size = grid.voxel_size;
  v.nx = grid.dims[0];
  v.ny = grid.dims[1];
  v.nz = grid.dims[2];
  v.truncation = grid.truncation;
  v.weight_cap = grid.weight_cap;
  kernels::tsdf_fuse(v, p, depth, grid.values, grid.weights);
}

TsdfGrid tsdf_integrate(TsdfGrid grid, const sim::DepthRender& render, const sim::CameraPose& camera) {
  integrate_into(grid, render.depth, camera);
  return grid;
}

std::vector<double> target_depth(const sim::DepthRender& render, int target_id) {
  std::vector<double> d(render.depth.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (render.instance[i] == target_id) d[i] = render.depth[i];
  return d;
}

}  // namespace xpg::decision
