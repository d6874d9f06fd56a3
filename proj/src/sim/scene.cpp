#include "xpg/sim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xpg/core/errors.hpp"
#include "xpg/core/random.hpp"
#include "xpg/sim/render.hpp"

namespace xpg::sim {

CameraFrame camera_frame(const CameraPose& pose) {
  const Vec3 forward = normalized(pose.look_at - pose.position);
  Vec3 side = cross(forward, Vec3{0, 0, 1});
  if (norm(side) < 1e-9) side = Vec3{1, 0, 0};
  const Vec3 right = normalized(side);
  const Vec3 down = cross(forward, right);
  return {right, down, forward};
}

void validate_camera(const CameraPose& pose, double workspace) {
  const double half = 0.5 * workspace;
  if (!(pose.position.z > kTableZ))
    throw std::invalid_argument("camera must be above the table");
  if (!(std::abs(pose.look_at.x) <= half && std::abs(pose.look_at.y) <= half))
    throw std::invalid_argument("camera look_at must lie inside the workspace");
  if (pose.intrinsics.width <= 0 || pose.intrinsics.height <= 0 || !(pose.intrinsics.focal > 0))
    throw std::invalid_argument("camera intrinsics must be positive");
  if (norm(pose.look_at - pose.position) < 1e-9)
    throw std::invalid_argument("camera position and look_at coincide");
}

int SceneState::target_id() const { return target().id; }

const ObjectInstance* SceneState::find(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

ObjectInstance* SceneState::find(int id) {
  for (auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const ObjectInstance& SceneState::target() const {
  for (const auto& o : objects)
    if (o.is_target) return o;
  throw ConsistencyError("scene has no target object");
}

std::string action_tag(const ActionPrimitive& action) {
  struct Visitor {
    std::string operator()(const GraspTarget&) const { return "grasp_target"; }
    std::string operator()(const RemoveOccluder&) const { return "remove_occluder"; }
    std::string operator()(const MoveView&) const { return "move_view"; }
  };
  return std::visit(Visitor{}, action);
}

namespace {

bool admissible(const Rect& candidate, const std::vector<ObjectInstance>& placed,
                double tolerance) {
  for (const auto& o : placed) {
    const double smaller = std::min(candidate.area(), o.footprint.area());
    if (overlap_area(candidate, o.footprint) > tolerance * smaller) return false;
  }
  return true;
}

// Rejection-samples one box; false if every try collides.
bool place_one(Rng& rng, const SceneConfig& config, std::vector<ObjectInstance>& placed) {
  const double half = 0.5 * config.workspace;
  for (int attempt = 0; attempt < config.max_rejection_tries; ++attempt) {
    const double w = rng.uniform(config.footprint_min, config.footprint_max);
    const double d = rng.uniform(config.footprint_min, config.footprint_max);
    const double h = rng.uniform(config.height_min, config.height_max);
    const double x0 = rng.uniform(-half, half - w);
    const double y0 = rng.uniform(-half, half - d);
    const Rect r{x0, y0, x0 + w, y0 + d};
    if (!admissible(r, placed, config.overlap_tolerance)) continue;
    ObjectInstance o;
    o.id = static_cast<int>(placed.size()) + 1;
    o.footprint = r;
    o.height = h;
    placed.push_back(o);
    return true;
  }
  return false;
}

// Signed coordinates along (along, across) axes so one routine handles a
// camera offset along either table axis.
struct AxisView {
  bool along_y;
  double a(double x, double y) const { return along_y ? y : x; }
  double c(double x, double y) const { return along_y ? x : y; }
};

// A wall between the spawn camera and the target, tall and wide enough to
// cover every camera ray that reaches the target box.
std::optional<ObjectInstance> design_blocker(const SceneState& scene, const ObjectInstance& target,
                                             double scale) {
  constexpr double kGap = 0.01;
  constexpr double kThickness = 0.03;
  constexpr double kMaxHeight = 0.35;
  const Vec3 cam = scene.camera.position;
  const Rect& t = target.footprint;
  const AxisView ax{std::abs(t.cy() - cam.y) >= std::abs(t.cx() - cam.x)};
  const double cam_a = ax.a(cam.x, cam.y);
  const double cam_c = ax.c(cam.x, cam.y);
  const double t_a0 = ax.a(t.x0, t.y0), t_a1 = ax.a(t.x1, t.y1);
  const double t_c0 = ax.c(t.x0, t.y0), t_c1 = ax.c(t.x1, t.y1);
  const bool cam_below = cam_a < 0.5 * (t_a0 + t_a1);
  double b_a0, b_a1;
  if (cam_below) {
    b_a1 = t_a0 - kGap;
    b_a0 = b_a1 - kThickness;
  } else {
    b_a0 = t_a1 + kGap;
    b_a1 = b_a0 + kThickness;
  }
  const double near_face = cam_below ? b_a1 : b_a0;
  double c_lo = 1e9, c_hi = -1e9, z_need = 0.0;
  for (double ta : {t_a0, t_a1}) {
    const double denom = ta - cam_a;
    if (std::abs(denom) < 1e-9) return std::nullopt;
    for (double face : {b_a0, b_a1}) {
      const double s = (face - cam_a) / denom;
      if (!(s > 0.0 && s < 1.0)) return std::nullopt;
      for (double tc : {t_c0, t_c1}) {
        const double c = cam_c + (tc - cam_c) * s;
        c_lo = std::min(c_lo, c);
        c_hi = std::max(c_hi, c);
      }
    }
    const double s = (near_face - cam_a) / denom;
    z_need = std::max(z_need, cam.z + (target.height - cam.z) * s);
  }
  const double margin = 0.01 * scale;
  const double half = 0.5 * scene.workspace;
  c_lo = std::max(-half, c_lo - margin);
  c_hi = std::min(half, c_hi + margin);
  if (b_a0 < -half || b_a1 > half) return std::nullopt;
  const double height = std::min(kMaxHeight, (1.1 * z_need + 0.005) * scale);
  ObjectInstance blocker;
  blocker.height = height;
  blocker.footprint = ax.along_y ? Rect{c_lo, b_a0, c_hi, b_a1} : Rect{b_a0, c_lo, b_a1, c_hi};
  return blocker;
}

std::int64_t target_pixels(const SceneState& scene) {
  const DepthRender img = render(scene, scene.camera);
  const int tid = scene.target_id();
  return std::count(img.instance.begin(), img.instance.end(), tid);
}

}  // namespace

SceneState generate_scene(int n_objects, std::uint64_t seed, const SceneConfig& config) {
  if (n_objects < 1 || n_objects > config.max_objects)
    throw std::invalid_argument("n_objects out of range: " + std::to_string(n_objects));
  if (config.family == SceneFamily::kOccluded && n_objects < 2)
    throw std::invalid_argument("occluded scenes need at least two objects");
  validate_camera(config.spawn_camera, config.workspace);

  Rng rng(seed);
  SceneState scene;
  scene.workspace = config.workspace;
  scene.camera = config.spawn_camera;
  scene.rng_seed = mix64(seed, 0x5ce7e5eedULL);

  if (config.family == SceneFamily::kRandom) {
    for (int i = 0; i < n_objects; ++i)
      if (!place_one(rng, config, scene.objects))
        throw GenerationError("could not place object " + std::to_string(i + 1) + " of " +
                              std::to_string(n_objects) + " after " +
                              std::to_string(config.max_rejection_tries) + " tries");
    scene.objects[rng.below(static_cast<std::uint64_t>(n_objects))].is_target = true;
    return scene;
  }

  // Occluded family: n-1 ordinary objects plus a wall hiding the target.
  for (int attempt = 0; attempt < config.max_rejection_tries; ++attempt) {
    scene.objects.clear();
    bool placed = true;
    for (int i = 0; i < n_objects - 1 && placed; ++i) placed = place_one(rng, config, scene.objects);
    if (!placed) continue;
    scene.objects[rng.below(static_cast<std::uint64_t>(n_objects - 1))].is_target = true;
    const ObjectInstance target = scene.target();
    for (int grow = 0; grow < 4; ++grow) {
      auto blocker = design_blocker(scene, target, 1.0 + 0.25 * grow);
      if (!blocker) break;
      if (overlap_area(blocker->footprint, target.footprint) > 0.0) break;
      blocker->id = n_objects;
      SceneState trial = scene;
      trial.objects.push_back(*blocker);
      if (target_pixels(trial) == 0) return trial;
    }
  }
  throw GenerationError("could not build an occluded scene with " + std::to_string(n_objects) +
                        " objects after " + std::to_string(config.max_rejection_tries) + " tries");
}

std::pair<SceneState, TransitionOutcome> execute(const SceneState& scene,
                                                 const ActionPrimitive& action,
                                                 const grasp::GraspScores& scores,
                                                 const DynamicsConfig& config) {
  if (scene.step_count >= config.max_motions)
    throw ConsistencyError("execute called with the motion budget exhausted");

  SceneState next = scene;
  TransitionOutcome outcome;
  const double draw = to_unit(mix64(scene.rng_seed, static_cast<std::uint64_t>(scene.step_count)));

  auto jitter = [&](ObjectInstance& obj) {
    if (!config.perturb_on_failure) return;
    const std::uint64_t key = mix64(scene.rng_seed ^ 0xfa11ULL, static_cast<std::uint64_t>(scene.step_count));
    const double dx = (2.0 * to_unit(key) - 1.0) * config.perturb_scale;
    const double dy = (2.0 * to_unit(mix64(key)) - 1.0) * config.perturb_scale;
    const double half = 0.5 * next.workspace;
    const double w = obj.footprint.width(), d = obj.footprint.depth();
    const double x0 = std::clamp(obj.footprint.x0 + dx, -half, half - w);
    const double y0 = std::clamp(obj.footprint.y0 + dy, -half, half - d);
    obj.footprint = Rect{x0, y0, x0 + w, y0 + d};
  };

  if (std::holds_alternative<GraspTarget>(action)) {
    ObjectInstance* target = nullptr;
    for (auto& o : next.objects)
      if (o.is_target) target = &o;
    if (target == nullptr || target->removed) {
      outcome.kind = OutcomeKind::kInfeasible;
    } else {
      outcome.grasp_attempted = true;
      if (draw < scores.q_target) {
        target->removed = true;
        next.success = true;
        outcome.grasp_succeeded = true;
        outcome.kind = OutcomeKind::kTargetExtracted;
      } else {
        jitter(*target);
      }
    }
  } else if (const auto* remove = std::get_if<RemoveOccluder>(&action)) {
    ObjectInstance* obj = next.find(remove->object_id);
    if (obj == nullptr || obj->removed || obj->is_target) {
      outcome.kind = OutcomeKind::kInfeasible;
    } else {
      outcome.grasp_attempted = true;
      const auto it = scores.per_object.find(obj->id);
      const double q = it == scores.per_object.end() ? 0.0 : it->second;
      if (draw < q) {
        obj->removed = true;
        outcome.grasp_succeeded = true;
      } else {
        jitter(*obj);
      }
    }
  } else {
    next.camera = std::get<MoveView>(action).pose;
  }
  ++next.step_count;
  return {std::move(next), outcome};
}

}  // namespace xpg::sim
