#pragma once

#include <span>
#include <array>
#include <cstddef>
#include <vector>

#include "xpg/sim/render.hpp"

namespace xpg::decision {

// Voxel grid of truncated signed distances, |value| <= truncation. A voxel
// with zero weight has never been observed.
struct TsdfGrid {
  sim::Vec3 origin;
  double voxel_size = 0.01;
  std::array<int, 3> dims{0, 0, 0};
  double truncation = 0.04;
  double weight_cap = 64.0;
  std::vector<double> values;
  std::vector<double> weights;

  static TsdfGrid make(sim::Vec3 origin, double voxel_size, std::array<int, 3> dims,
                       double truncation, double weight_cap);

  std::size_t size() const { return values.size(); }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * dims[1] + iy) * dims[0] + ix;
  }
  sim::Vec3 center(int ix, int iy, int iz) const;
  bool contains(int ix, int iy, int iz) const {
    return ix >= 0 && iy >= 0 && iz >= 0 && ix < dims[0] && iy < dims[1] && iz < dims[2];
  }
  bool empty_of_observations() const;

  friend bool operator==(const TsdfGrid&, const TsdfGrid&) = default;
};

// Fuses a depth image (z-depth per pixel, NaN = no measurement) seen from
// camera into the grid: sdf = pixel depth - voxel depth, truncated, averaged
// with the stored value by weight; the weight is incremented up to the cap.
void integrate_into(TsdfGrid& grid, std::span<const double> depth, const sim::CameraPose& camera);

TsdfGrid tsdf_integrate(TsdfGrid grid, const sim::DepthRender& render, const sim::CameraPose& camera);

// Depth image keeping only the target's pixels (others NaN), used to fuse a
// target-only volume.
std::vector<double> target_depth(const sim::DepthRender& render, int target_id);

}  // namespace xpg::decision
