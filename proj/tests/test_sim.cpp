#include <doctest.h>

#include <algorithm>
#include <set>

#include "test_helpers.hpp"
#include "xpg/core/errors.hpp"
#include "xpg/core/random.hpp"
#include "xpg/sim/render.hpp"
#include "xpg/sim/scene.hpp"
#include "xpg/sim/scene_io.hpp"

using namespace xpg;
using namespace xpg::sim;
using testing::box;
using testing::scene_of;

TEST_CASE("single object scene makes that object the target") {
  const SceneState s = generate_scene(1, 42, SceneConfig{});
  REQUIRE(s.objects.size() == 1);
  CHECK(s.objects[0].is_target);
  CHECK(s.target_id() == s.objects[0].id);
}

TEST_CASE("twenty objects lie inside the workspace with bounded overlap") {
  const SceneConfig cfg;
  const SceneState s = generate_scene(20, 7, cfg);
  REQUIRE(s.objects.size() == 20);
  const Rect ws{-0.25, -0.25, 0.25, 0.25};
  int targets = 0;
  std::set<int> ids;
  for (const auto& o : s.objects) {
    CHECK(ws.contains(o.footprint));
    CHECK(o.height > 0.0);
    targets += o.is_target ? 1 : 0;
    ids.insert(o.id);
    for (const auto& p : s.objects) {
      if (p.id == o.id) continue;
      const double smaller = std::min(o.footprint.area(), p.footprint.area());
      CHECK(overlap_area(o.footprint, p.footprint) <= cfg.overlap_tolerance * smaller + 1e-15);
    }
  }
  CHECK(targets == 1);
  CHECK(ids.size() == 20);
  CHECK(ids.count(kBackground) == 0);
}

TEST_CASE("generation is deterministic") {
  const SceneConfig cfg;
  CHECK(generate_scene(5, 13, cfg) == generate_scene(5, 13, cfg));
  CHECK(scene_to_json(generate_scene(5, 13, cfg)).dump() == scene_to_json(generate_scene(5, 13, cfg)).dump());
  CHECK_FALSE(generate_scene(5, 13, cfg) == generate_scene(5, 14, cfg));
}

TEST_CASE("over-dense configs raise a generation error") {
  SceneConfig cfg;
  cfg.footprint_min = 0.2;
  cfg.footprint_max = 0.24;
  cfg.overlap_tolerance = 0.0;
  cfg.max_rejection_tries = 50;
  CHECK_THROWS_AS(generate_scene(20, 1, cfg), GenerationError);
  CHECK_THROWS_AS(generate_scene(0, 1, SceneConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(21, 1, SceneConfig{}), std::invalid_argument);
}

TEST_CASE("occluded family hides every target pixel from the spawn pose") {
  SceneConfig cfg;
  cfg.family = SceneFamily::kOccluded;
  for (int n : {2, 5, 10, 20}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SceneState s = generate_scene(n, seed, cfg);
      REQUIRE(static_cast<int>(s.objects.size()) == n);
      const DepthRender r = render(s, s.camera);
      CHECK(std::count(r.instance.begin(), r.instance.end(), s.target_id()) == 0);
      const Rect ws{-0.25, -0.25, 0.25, 0.25};
      for (const auto& o : s.objects) CHECK(ws.contains(o.footprint));
    }
  }
}

TEST_CASE("empty scene renders only the table") {
  const SceneState s = scene_of({});
  const CameraPose cam = testing::top_down();
  const DepthRender r = render(s, cam);
  CHECK(std::all_of(r.instance.begin(), r.instance.end(), [](int i) { return i == 0; }));
  for (double d : r.depth) CHECK(d == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("a lone centered object is one contiguous blob") {
  const SceneState s = scene_of({box(1, -0.05, -0.05, 0.05, 0.05, 0.1, true)});
  const DepthRender r = render(s, testing::top_down());
  int umin = 99, umax = -1, vmin = 99, vmax = -1, count = 0;
  for (int v = 0; v < r.height; ++v)
    for (int u = 0; u < r.width; ++u)
      if (r.instance_at(u, v) == 1) {
        ++count;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
  REQUIRE(count > 0);
  CHECK(count == (umax - umin + 1) * (vmax - vmin + 1));
  CHECK(r.depth_at(32, 32) == doctest::Approx(0.5));
}

TEST_CASE("renderer matches a per-ray oracle on two-object scenes") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const double ax = rng.uniform(-0.15, 0.1), ay = rng.uniform(-0.05, 0.15);
    const double bx = ax + rng.uniform(-0.05, 0.05), by = ay - rng.uniform(0.05, 0.12);
    const SceneState s = scene_of({box(1, ax, ay, ax + 0.06, ay + 0.06, rng.uniform(0.03, 0.08), true),
                                   box(2, bx, by, bx + 0.07, by + 0.03, rng.uniform(0.08, 0.2))});
    const CameraPose cam;
    const DepthRender r = render(s, cam);
    for (int v = 0; v < r.height; ++v)
      for (int u = 0; u < r.width; ++u) {
        const auto hit = testing::oracle_ray(s, cam, u, v);
        REQUIRE(r.instance_at(u, v) == hit.id);
        REQUIRE(r.depth_at(u, v) == doctest::Approx(hit.t).epsilon(1e-12));
      }
  }
}

TEST_CASE("an object strictly behind a taller one disappears") {
  // The camera looks along +y from y = -0.5; B stands in front of A.
  const SceneState s = scene_of({box(1, -0.02, 0.05, 0.02, 0.08, 0.03, true),
                                 box(2, -0.08, -0.05, 0.08, 0.0, 0.3)});
  const DepthRender r = render(s, CameraPose{});
  CHECK(std::count(r.instance.begin(), r.instance.end(), 1) == 0);
  CHECK(std::count(r.instance.begin(), r.instance.end(), 2) > 0);
  const auto counts = projection_counts(s, CameraPose{});
  CHECK(counts.size() == 2);
  CHECK(counts[0].first == 1);
  CHECK(counts[0].second > 0);
}

TEST_CASE("projection counts equal a lone render of each object") {
  const SceneState s = generate_scene(8, 3, SceneConfig{});
  const auto counts = projection_counts(s, s.camera);
  for (const auto& [id, count] : counts) {
    SceneState alone = s;
    for (auto& o : alone.objects) o.removed = o.id != id;
    const DepthRender r = render(alone, s.camera);
    CHECK(count == std::count(r.instance.begin(), r.instance.end(), id));
  }
}

TEST_CASE("render is pure") {
  const SceneState s = generate_scene(10, 4, SceneConfig{});
  CHECK(render(s, s.camera) == render(s, s.camera));
}

TEST_CASE("execute: certain grasp extracts the target") {
  const SceneState s = scene_of({box(1, 0, 0, 0.05, 0.05, 0.05, true)});
  grasp::GraspScores sc;
  sc.per_object = {{1, 1.0}};
  sc.q_target = 1.0;
  const auto [next, out] = execute(s, GraspTarget{}, sc, DynamicsConfig{});
  CHECK(out.kind == OutcomeKind::kTargetExtracted);
  CHECK(next.success);
  CHECK(next.target().removed);
  CHECK(next.step_count == 1);
}

TEST_CASE("execute: infeasible removals and grasps") {
  SceneState s = scene_of({box(1, 0, 0, 0.05, 0.05, 0.05, true), box(3, 0.1, 0.1, 0.15, 0.15, 0.05)});
  s.objects[1].removed = true;
  grasp::GraspScores sc;
  CHECK(execute(s, RemoveOccluder{3}, sc, {}).second.kind == OutcomeKind::kInfeasible);
  CHECK(execute(s, RemoveOccluder{7}, sc, {}).second.kind == OutcomeKind::kInfeasible);
  CHECK(execute(s, RemoveOccluder{1}, sc, {}).second.kind == OutcomeKind::kInfeasible);
  CHECK(execute(s, RemoveOccluder{kBackground}, sc, {}).second.kind == OutcomeKind::kInfeasible);
  CHECK(execute(s, RemoveOccluder{3}, sc, {}).first.step_count == 1);
  SceneState gone = s;
  gone.objects[0].removed = true;
  CHECK(execute(gone, GraspTarget{}, sc, {}).second.kind == OutcomeKind::kInfeasible);
}

TEST_CASE("execute: move view only changes the camera") {
  const SceneState s = generate_scene(6, 2, SceneConfig{});
  CameraPose p;
  p.position = {0.3, 0.0, 0.4};
  const auto [next, out] = execute(s, MoveView{p}, grasp::GraspScores{}, {});
  CHECK(out.kind == OutcomeKind::kOrdinary);
  CHECK(next.camera == p);
  CHECK(next.objects == s.objects);
  CHECK(next.step_count == s.step_count + 1);
}

TEST_CASE("execute: failed grasps leave geometry unchanged") {
  const SceneState s = generate_scene(6, 2, SceneConfig{});
  grasp::GraspScores sc;  // q = 0 everywhere
  const auto [next, out] = execute(s, GraspTarget{}, sc, {});
  CHECK(out.kind == OutcomeKind::kOrdinary);
  CHECK(out.grasp_attempted);
  CHECK_FALSE(out.grasp_succeeded);
  CHECK(next.objects == s.objects);
  CHECK_THROWS_AS(execute(SceneState{next.objects, 0.5, {}, 10, 1, false}, GraspTarget{}, sc, {}),
                  ConsistencyError);
}

TEST_CASE("execute: grasp draws are Bernoulli in the score") {
  SceneState s = scene_of({box(1, 0, 0, 0.05, 0.05, 0.05, true)});
  grasp::GraspScores sc;
  sc.q_target = 0.3;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    s.rng_seed = seed;
    wins += execute(s, GraspTarget{}, sc, {}).first.success ? 1 : 0;
  }
  CHECK(wins / 4000.0 == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("perturbation on failure moves only the grasped object") {
  const SceneState s = generate_scene(6, 9, SceneConfig{});
  DynamicsConfig dyn;
  dyn.perturb_on_failure = true;
  const auto next = execute(s, GraspTarget{}, grasp::GraspScores{}, dyn).first;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (s.objects[i].is_target) {
      CHECK(next.objects[i].footprint.area() == doctest::Approx(s.objects[i].footprint.area()));
      CHECK_FALSE(next.objects[i].footprint == s.objects[i].footprint);
    } else {
      CHECK(next.objects[i] == s.objects[i]);
    }
  }
}

TEST_CASE("scene snapshots round-trip") {
  SceneConfig cfg;
  cfg.family = SceneFamily::kOccluded;
  SceneState s = generate_scene(12, 77, cfg);
  s.step_count = 3;
  s.objects[2].removed = true;
  CHECK(scene_from_json(scene_to_json(s)) == s);
  auto j = scene_to_json(s);
  j["version"] = 99;
  CHECK_THROWS_AS(scene_from_json(j), ConfigError);
}

TEST_CASE("camera validation") {
  CameraPose c;
  CHECK_NOTHROW(validate_camera(c, 0.5));
  c.position.z = -0.1;
  CHECK_THROWS_AS(validate_camera(c, 0.5), std::invalid_argument);
  c = CameraPose{};
  c.look_at = {1.0, 0.0, 0.0};
  CHECK_THROWS_AS(validate_camera(c, 0.5), std::invalid_argument);
  c = CameraPose{};
  c.intrinsics.width = 0;
  CHECK_THROWS_AS(validate_camera(c, 0.5), std::invalid_argument);
}
