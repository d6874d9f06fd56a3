#include "xpg/eval/env.hpp"

#include "xpg/core/errors.hpp"
#include "xpg/core/random.hpp"
#include "xpg/decision/decide.hpp"
#include "xpg/rl/reward.hpp"
#include "xpg/sim/render.hpp"

namespace xpg::eval {

MechanicalSearchEnv::MechanicalSearchEnv(EnvConfig config) : config_(std::move(config)) {
  config_.perception.max_motions = config_.dynamics.max_motions;
  ring_ = decision::candidate_ring(config_.nbv, config_.scene.spawn_camera.intrinsics);
}

rl::EnvObservation MechanicalSearchEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  const sim::SceneConfig& sc = config_.scene;
  int n = sc.n_objects;
  if (n == 0)
    n = sc.min_objects + static_cast<int>(rng.below(static_cast<std::uint64_t>(sc.max_objects - sc.min_objects + 1)));
  family_ = sc.family;
  if (config_.mix_families) {
    family_ = rng.uniform() < sc.occluded_prob ? sim::SceneFamily::kOccluded : sim::SceneFamily::kRandom;
  }
  sim::SceneConfig cfg = sc;
  cfg.family = family_;
  for (int attempt = 0;; ++attempt) {
    try {
      scene_ = sim::generate_scene(n, mix64(seed, static_cast<std::uint64_t>(attempt)), cfg);
      break;
    } catch (const GenerationError&) {
      if (attempt >= config_.generation_retries) throw;
    }
  }
  geometry_ = decision::make_scene_grid(config_.nbv, scene_.workspace);
  target_ = decision::make_scene_grid(config_.nbv, scene_.workspace);
  last_ = StepInfo{};
  done_ = false;
  observe();
  return make_observation();
}

void MechanicalSearchEnv::observe() {
  render_ = sim::render(scene_, scene_.camera);
  scores_ = grasp::score_scene(scene_, render_, config_.oracle);
  decision::integrate_into(geometry_, render_.depth, scene_.camera);
  const auto td = decision::target_depth(render_, scene_.target_id());
  decision::integrate_into(target_, td, scene_.camera);
  observation_ = perception::build_observation(render_, scene_.target_id(), scores_,
                                               scene_.step_count, config_.perception);
}

rl::EnvObservation MechanicalSearchEnv::make_observation() const {
  rl::EnvObservation o;
  o.features = observation_.features;
  if (config_.with_image) o.image = perception::stacked_channels(observation_);
  return o;
}

sim::CameraPose MechanicalSearchEnv::plan_next_view() const {
  std::vector<sim::CameraPose> candidates;
  for (const auto& p : ring_)
    if (!(p.position == scene_.camera.position)) candidates.push_back(p);
  return decision::plan_nbv(geometry_, target_, candidates, config_.nbv, config_.oracle,
                            scene_.workspace, scores_.target_clearance)
      .pose;
}

rl::EnvStep MechanicalSearchEnv::step(const rl::EnvAction& action) {
  if (done_) throw std::logic_error("step() on a finished episode; call reset()");
  last_ = StepInfo{};
  last_.q_target = scores_.q_target;
  last_.q_occlude = scores_.q_occlude;
  auto next_view = [this] { return plan_next_view(); };

  sim::ActionPrimitive primitive;
  bool moves_view = false;
  if (const auto* t = std::get_if<decision::Thresholds>(&action)) {
    const decision::Thresholds thr = decision::clamped(*t);
    last_.tau1 = thr.tau1;
    last_.tau2 = thr.tau2;
    moves_view = decision::select_priority(thr, scores_) == decision::Priority::kMoveView;
    if (!(moves_view && config_.view_ends_episode)) primitive = decision::decide(thr, scores_, next_view);
  } else {
    const std::size_t index = std::get<std::size_t>(action);
    moves_view = index >= 2;
    if (!(moves_view && config_.view_ends_episode))
      primitive = decision::decide_flat_index(index, scores_, next_view);
  }

  rl::EnvStep out;
  if (moves_view && config_.view_ends_episode) {
    done_ = true;
    out.reward = rl::kRewardStep;
    out.done = true;
    out.observation = make_observation();
    return out;
  }

  last_.action = sim::action_tag(primitive);
  auto [next, outcome] = sim::execute(scene_, primitive, scores_, config_.dynamics);
  scene_ = std::move(next);
  last_.outcome = outcome.kind;
  out.reward = rl::reward(outcome);
  out.success = scene_.success;
  done_ = scene_.success || scene_.step_count >= config_.dynamics.max_motions;
  out.done = done_;
  if (!scene_.success) observe();
  out.observation = make_observation();
  return out;
}

}  // namespace xpg::eval
