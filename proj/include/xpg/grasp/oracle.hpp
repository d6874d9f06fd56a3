#pragma once

#include "xpg/grasp/scores.hpp"
#include "xpg/sim/render.hpp"

namespace xpg::grasp {

struct OracleConfig {
  double alpha = 1.0;  // visibility exponent
  double beta = 1.0;   // clearance exponent
  // Only objects that cover some target ray count as occluders.
  bool strict_occluders = false;
  double clearance_radius = 0.03;  // meters
};

// Fraction of the ring of width `radius` around the object's footprint not
// covered by other live objects. Exact (union area by coordinate
// compression). 1.0 when radius is 0.
double clearance(const sim::SceneState& scene, const sim::ObjectInstance& object, double radius);

// visibility^alpha * clearance^beta, clamped to [0, 1]; 0 when invisible.
double object_score(double visibility, double clearance, const OracleConfig& config);

// render must come from scene.camera. Every live object is scored; the
// target's entry becomes q_target and the best eligible non-target entry
// q_occlude (ties go to the lower id).
GraspScores score_scene(const sim::SceneState& scene, const sim::DepthRender& render,
                        const OracleConfig& config);

}  // namespace xpg::grasp
