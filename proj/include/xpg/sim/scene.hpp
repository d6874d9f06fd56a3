#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "xpg/grasp/scores.hpp"
#include "xpg/sim/geometry.hpp"

namespace xpg::sim {

// Id 0 is reserved for the background in instance images.
inline constexpr int kBackground = 0;

struct ObjectInstance {
  int id = 0;
  Rect footprint;
  double height = 0;
  bool is_target = false;
  bool removed = false;

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Intrinsics {
  double focal = 64.0;  // pixels
  int width = 64;
  int height = 64;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

struct CameraPose {
  Vec3 position{0.0, -0.5, 0.5};
  Vec3 look_at{0.0, 0.0, 0.0};
  Intrinsics intrinsics;

  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

// Orthonormal camera basis; image u grows along right, v along down.
struct CameraFrame {
  Vec3 right, down, forward;
};

CameraFrame camera_frame(const CameraPose& pose);

// Throws std::invalid_argument when the pose violates its invariants.
void validate_camera(const CameraPose& pose, double workspace);

enum class SceneFamily { kRandom, kOccluded };

struct SceneConfig {
  double workspace = 0.5;  // square side, meters, centered on the origin
  int n_objects = 0;       // 0: sample uniformly from [min_objects, max_objects]
  int min_objects = 5;
  int max_objects = 20;
  double footprint_min = 0.04;
  double footprint_max = 0.10;
  double height_min = 0.03;
  double height_max = 0.15;
  // Largest admissible overlap, as a fraction of the smaller footprint.
  double overlap_tolerance = 0.1;
  int max_rejection_tries = 2000;
  SceneFamily family = SceneFamily::kRandom;
  // Probability that a sampled training scene uses the occluded family.
  double occluded_prob = 0.25;
  // Looks down on the workspace center from the -y side.
  CameraPose spawn_camera{{0.0, -0.35, 0.6}, {0.0, 0.0, 0.0}, {}};
};

struct DynamicsConfig {
  int max_motions = 10;
  bool perturb_on_failure = false;
  double perturb_scale = 0.01;
};

struct SceneState {
  std::vector<ObjectInstance> objects;
  double workspace = 0.5;
  CameraPose camera;
  int step_count = 0;
  std::uint64_t rng_seed = 0;
  bool success = false;

  int target_id() const;
  const ObjectInstance* find(int id) const;
  ObjectInstance* find(int id);
  const ObjectInstance& target() const;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

struct GraspTarget {
  friend bool operator==(const GraspTarget&, const GraspTarget&) = default;
};
struct RemoveOccluder {
  int object_id = kBackground;
  friend bool operator==(const RemoveOccluder&, const RemoveOccluder&) = default;
};
struct MoveView {
  CameraPose pose;
  friend bool operator==(const MoveView&, const MoveView&) = default;
};

using ActionPrimitive = std::variant<GraspTarget, RemoveOccluder, MoveView>;

// Short tag: "grasp_target", "remove_occluder" or "move_view".
std::string action_tag(const ActionPrimitive& action);

enum class OutcomeKind { kTargetExtracted, kInfeasible, kOrdinary };

struct TransitionOutcome {
  OutcomeKind kind = OutcomeKind::kOrdinary;
  bool grasp_attempted = false;
  bool grasp_succeeded = false;
};


// Throws GenerationError when an object cannot be placed within
// config.max_rejection_tries attempts, std::invalid_argument on a bad count.
SceneState generate_scene(int n_objects, std::uint64_t seed, const SceneConfig& config);

// Applies one primitive. Grasp and removal succeed with probability equal to
// the object's score, using a draw keyed on (rng_seed, step_count).
std::pair<SceneState, TransitionOutcome> execute(const SceneState& scene,
                                                 const ActionPrimitive& action,
                                                 const grasp::GraspScores& scores,
                                                 const DynamicsConfig& config);

}  // namespace xpg::sim
