#include "xpg/decision/nbv.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace xpg::decision {

std::vector<sim::CameraPose> candidate_ring(const NbvConfig& config, const sim::Intrinsics& intrinsics) {
  std::vector<sim::CameraPose> out;
  for (double el_deg : config.elevations_deg) {
    const double el = el_deg * std::numbers::pi / 180.0;
    for (int k = 0; k < config.azimuth_count; ++k) {
      const double az = 2.0 * std::numbers::pi * k / config.azimuth_count;
      sim::CameraPose p;
      p.position = {config.ring_radius * std::cos(el) * std::cos(az),
                    config.ring_radius * std::cos(el) * std::sin(az),
                    config.ring_radius * std::sin(el)};
      p.look_at = {0.0, 0.0, 0.0};
      p.intrinsics = intrinsics;
      out.push_back(p);
    }
  }
  return out;
}

TsdfGrid make_scene_grid(const NbvConfig& c, double workspace) {
  const double side = workspace + 2.0 * c.grid_margin;
  const int n_xy = static_cast<int>(std::ceil(side / c.voxel_size - 1e-9));
  // Two voxels below the table so the table surface has a zero crossing.
  const double z0 = sim::kTableZ - 2.0 * c.voxel_size;
  const int n_z = static_cast<int>(std::ceil((c.grid_height - z0) / c.voxel_size - 1e-9));
  return TsdfGrid::make({-0.5 * side, -0.5 * side, z0}, c.voxel_size, {n_xy, n_xy, n_z},
                        c.truncation_mult * c.voxel_size, c.weight_cap);
}

namespace {

enum class Sample { kFree, kTarget, kOccupied, kUnknown };

struct Marcher {
  const TsdfGrid& geometry;
  const TsdfGrid& target;
  double half_workspace;
  double unknown_height;

  Sample classify(sim::Vec3 p, bool ignore_geometry) const {
    const auto& g = geometry;
    const int ix = static_cast<int>(std::floor((p.x - g.origin.x) / g.voxel_size));
    const int iy = static_cast<int>(std::floor((p.y - g.origin.y) / g.voxel_size));
    const int iz = static_cast<int>(std::floor((p.z - g.origin.z) / g.voxel_size));
    if (!g.contains(ix, iy, iz)) return Sample::kFree;
    const std::size_t i = g.index(ix, iy, iz);
    if (target.weights[i] > 0.0 && target.values[i] <= 0.0) return Sample::kTarget;
    if (ignore_geometry) return Sample::kFree;
    if (g.weights[i] > 0.0) return g.values[i] <= 0.0 ? Sample::kOccupied : Sample::kFree;
    if (std::abs(p.x) <= half_workspace && std::abs(p.y) <= half_workspace && p.z <= unknown_height)
      return Sample::kUnknown;
    return Sample::kFree;
  }

  // First non-free sample along the ray, kFree if it leaves the volume or
  // reaches the table.
  Sample march(sim::Vec3 origin, sim::Vec3 dir, bool ignore_geometry) const {
    const auto& g = geometry;
    const double lo[3] = {g.origin.x, g.origin.y, g.origin.z};
    const double hi[3] = {g.origin.x + g.dims[0] * g.voxel_size, g.origin.y + g.dims[1] * g.voxel_size,
                          g.origin.z + g.dims[2] * g.voxel_size};
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    double t0 = 0.0, t1 = 1e9;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-12) {
        if (o[a] < lo[a] || o[a] > hi[a]) return Sample::kFree;
        continue;
      }
      double ta = (lo[a] - o[a]) / d[a], tb = (hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    const double step = 0.75 * g.voxel_size;
    for (double t = t0 + 0.5 * step; t < t1; t += step) {
      const sim::Vec3 p = origin + t * dir;
      if (p.z <= sim::kTableZ) return Sample::kFree;
      const Sample s = classify(p, ignore_geometry);
      if (s != Sample::kFree) return s;
    }
    return Sample::kFree;
  }
};

bool has_target_voxel(const TsdfGrid& target) {
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target.weights[i] > 0.0 && target.values[i] <= 0.0) return true;
  return false;
}

}  // namespace

double synthesized_visibility(const TsdfGrid& geometry, const TsdfGrid& target,
                              const sim::CameraPose& pose, const NbvConfig& config,
                              double workspace) {
  sim::CameraPose coarse = pose;
  const double scale = static_cast<double>(config.render_size) / pose.intrinsics.width;
  coarse.intrinsics.width = config.render_size;
  coarse.intrinsics.height = config.render_size;
  coarse.intrinsics.focal = pose.intrinsics.focal * scale;
  const sim::PixelRays rays = sim::pixel_rays(coarse);
  const Marcher m{geometry, target, 0.5 * workspace, config.unknown_height};
  const bool known = has_target_voxel(target);

  std::size_t hits = 0, reachable = 0;
  const std::size_t n = rays.dx.size();
  for (std::size_t i = 0; i < n; ++i) {
    const sim::Vec3 dir = sim::normalized({rays.dx[i], rays.dy[i], rays.dz[i]});
    const Sample s = m.march(rays.origin, dir, false);
    if (known) {
      if (s == Sample::kTarget) ++hits;
      if (m.march(rays.origin, dir, true) == Sample::kTarget) ++reachable;
    } else if (s == Sample::kUnknown) {
      ++hits;
    }
  }
  if (known) return reachable == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(reachable);
  return static_cast<double>(hits) / static_cast<double>(n);
}

ViewCandidate plan_nbv(const TsdfGrid& geometry, const TsdfGrid& target,
                       const std::vector<sim::CameraPose>& candidates, const NbvConfig& config,
                       const grasp::OracleConfig& oracle, double workspace,
                       double target_clearance) {
  if (candidates.empty()) throw std::invalid_argument("plan_nbv needs at least one candidate");
  ViewCandidate best{candidates.front(), -1.0, 0};
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double vis = synthesized_visibility(geometry, target, candidates[k], config, workspace);
    const double q = grasp::object_score(vis, target_clearance, oracle);
    if (q > best.predicted_q_target) best = {candidates[k], q, k};
  }
  return best;
}

}  // namespace xpg::decision
