#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xpg/decision/nbv.hpp"
#include "xpg/decision/tsdf.hpp"
#include "xpg/grasp/oracle.hpp"
#include "xpg/perception/perception.hpp"
#include "xpg/rl/env.hpp"
#include "xpg/sim/scene.hpp"

namespace xpg::eval {

struct EnvConfig {
  sim::SceneConfig scene;
  sim::DynamicsConfig dynamics;
  grasp::OracleConfig oracle;
  decision::NbvConfig nbv;
  perception::PerceptionConfig perception;
  // Draw the occluded family with probability scene.occluded_prob per episode
  // instead of always using scene.family (training mix).
  bool mix_families = false;
  // Also emit the stacked (mask, ODM) channels with each observation.
  bool with_image = false;
  // When the cascade falls through to MoveView the episode ends as a failure
  // without a motion.
  bool view_ends_episode = false;
  // Further attempts (with derived seeds) when a scene cannot be generated.
  int generation_retries = 16;
};

struct StepInfo {
  std::string action;  // action tag, empty when the episode ended without acting
  double q_target = 0.0;
  double q_occlude = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  sim::OutcomeKind outcome = sim::OutcomeKind::kOrdinary;
};

// Scene, perception, oracle and NBV planner behind the Environment interface.
// Threshold actions go through the priority cascade; index actions through
// the flat mapping. Rewards follow the three-case reward function.
class MechanicalSearchEnv : public rl::Environment {
 public:
  explicit MechanicalSearchEnv(EnvConfig config);

  rl::EnvObservation reset(std::uint64_t seed) override;
  rl::EnvStep step(const rl::EnvAction& action) override;

  const EnvConfig& config() const { return config_; }
  const sim::SceneState& scene() const { return scene_; }
  const sim::DepthRender& current_render() const { return render_; }
  const grasp::GraspScores& scores() const { return scores_; }
  const perception::Observation& observation() const { return observation_; }
  const decision::TsdfGrid& geometry_volume() const { return geometry_; }
  const decision::TsdfGrid& target_volume() const { return target_; }
  const StepInfo& last_step() const { return last_; }
  sim::SceneFamily family() const { return family_; }
  bool done() const { return done_; }

  // The pose the planner would move to from the current state.
  sim::CameraPose plan_next_view() const;

 private:
  void observe();
  rl::EnvObservation make_observation() const;

  EnvConfig config_;
  std::vector<sim::CameraPose> ring_;
  sim::SceneState scene_;
  sim::SceneFamily family_ = sim::SceneFamily::kRandom;
  sim::DepthRender render_;
  grasp::GraspScores scores_;
  perception::Observation observation_;
  decision::TsdfGrid geometry_, target_;
  StepInfo last_;
  bool done_ = true;
};

}  // namespace xpg::eval
