#pragma once

#include <map>
#include <optional>

namespace xpg::grasp {

// Per-object grasp quality in [0, 1]. q_target is the target's entry (0 when
// invisible); q_occlude is the max over eligible occluders and best_occluder
// attains it.
struct GraspScores {
  std::map<int, double> per_object;
  double q_target = 0.0;
  double q_occlude = 0.0;
  std::optional<int> best_occluder;
  // Lateral free space around the target footprint; view planning reuses it.
  double target_clearance = 1.0;
};

}  // namespace xpg::grasp
