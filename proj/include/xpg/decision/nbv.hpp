#pragma once

#include <vector>

#include "xpg/decision/tsdf.hpp"
#include "xpg/grasp/oracle.hpp"

namespace xpg::decision {

struct NbvConfig {
  double ring_radius = 0.6;
  std::vector<double> elevations_deg{35.0, 65.0};
  int azimuth_count = 8;
  double voxel_size = 0.01;
  double truncation_mult = 4.0;
  double weight_cap = 64.0;
  // Volume: the workspace plus margin, from just below the table up to height.
  double grid_margin = 0.05;
  double grid_height = 0.38;
  // Synthesized views are rendered at render_size x render_size.
  int render_size = 24;
  // Unobserved voxels below this height inside the workspace block rays.
  double unknown_height = 0.15;
};

struct ViewCandidate {
  sim::CameraPose pose;
  double predicted_q_target = 0.0;
  std::size_t index = 0;
};

// 8 azimuths x 2 elevations by default, ordered elevation-major, azimuth 0
// on +x, all looking at the workspace center.
std::vector<sim::CameraPose> candidate_ring(const NbvConfig& config,
                                            const sim::Intrinsics& intrinsics);

// Empty volume covering the workspace.
TsdfGrid make_scene_grid(const NbvConfig& config, double workspace);

// Visibility of the believed target region from a pose, ray-marched through
// the fused volumes. `target` is the target-only volume; while it holds no
// target voxel, unobserved space in the workspace counts as potential target.
double synthesized_visibility(const TsdfGrid& geometry, const TsdfGrid& target,
                              const sim::CameraPose& pose, const NbvConfig& config,
                              double workspace);

// Scores every candidate with the grasp score of its synthesized visibility
// and returns the best; ties keep candidate order. Throws
// std::invalid_argument on an empty list.
ViewCandidate plan_nbv(const TsdfGrid& geometry, const TsdfGrid& target,
                       const std::vector<sim::CameraPose>& candidates, const NbvConfig& config,
                       const grasp::OracleConfig& oracle, double workspace,
                       double target_clearance = 1.0);

}  // namespace xpg::decision
