#include <doctest.h>

#include <cmath>
#include <limits>

#include "test_helpers.hpp"
#include "xpg/decision/decide.hpp"
#include "xpg/decision/nbv.hpp"
#include "xpg/decision/tsdf.hpp"
#include "xpg/sim/render.hpp"

using namespace xpg;
using namespace xpg::decision;
using testing::box;
using testing::scene_of;

namespace {

grasp::GraspScores scores(double qt, double qo, std::optional<int> best = 7) {
  grasp::GraspScores s;
  s.q_target = qt;
  s.q_occlude = qo;
  s.best_occluder = best;
  return s;
}

sim::CameraPose marker_pose() {
  sim::CameraPose p;
  p.position = {0.1, 0.2, 0.3};
  return p;
}

}  // namespace

TEST_CASE("cascade examples") {
  const Thresholds t{0.5, 0.5};
  const auto p = marker_pose();
  CHECK(std::holds_alternative<sim::GraspTarget>(decide(t, scores(0.9, 0.1), p)));
  CHECK(decide(t, scores(0.3, 0.7), p) == sim::ActionPrimitive{sim::RemoveOccluder{7}});
  CHECK(decide(t, scores(0.3, 0.2), p) == sim::ActionPrimitive{sim::MoveView{p}});
  CHECK(std::holds_alternative<sim::GraspTarget>(decide(t, scores(0.5, 0.0, std::nullopt), p)));
  CHECK(std::holds_alternative<sim::RemoveOccluder>(decide(t, scores(0.3, 0.5), p)));
}

TEST_CASE("next view is computed only when both gates fail") {
  int calls = 0;
  auto nv = [&] {
    ++calls;
    return marker_pose();
  };
  decide({0.5, 0.5}, scores(0.9, 0.9), nv);
  decide({0.5, 0.5}, scores(0.1, 0.9), nv);
  CHECK(calls == 0);
  decide({0.5, 0.5}, scores(0.1, 0.1), nv);
  CHECK(calls == 1);
}

TEST_CASE("positive q_occlude with no occluder named is a consistency error") {
  CHECK_THROWS_AS(decide({0.5, 0.5}, scores(0.1, 0.8, std::nullopt), marker_pose()), ConsistencyError);
  // With nothing to remove and zero q_occlude, the cascade asks for a new view.
  CHECK(std::holds_alternative<sim::MoveView>(decide({0.5, 0.0}, scores(0.1, 0.0, std::nullopt), marker_pose())));
}

TEST_CASE("thresholds are clamped to the unit interval") {
  CHECK(clamped({-0.5, 1.5}) == Thresholds{0.0, 1.0});
  CHECK(clamped({0.25, 0.75}) == Thresholds{0.25, 0.75});
}

TEST_CASE("flat decisions") {
  const auto p = marker_pose();
  const double grasp[3] = {2, 0, 0}, remove[3] = {0, 2, 0}, move[3] = {0, 0, 2}, tie[3] = {1, 1, 1};
  CHECK(std::holds_alternative<sim::GraspTarget>(decide_flat(grasp, scores(0, 0), p)));
  CHECK(decide_flat(remove, scores(0, 0.4), p) == sim::ActionPrimitive{sim::RemoveOccluder{7}});
  CHECK(decide_flat(remove, scores(0, 0, std::nullopt), p) ==
        sim::ActionPrimitive{sim::RemoveOccluder{sim::kBackground}});
  CHECK(decide_flat(move, scores(0, 0), p) == sim::ActionPrimitive{sim::MoveView{p}});
  CHECK(flat_argmax(tie) == 0);
}

TEST_CASE("flat remove with no occluder is infeasible downstream") {
  const auto s = scene_of({box(1, 0, 0, 0.05, 0.05, 0.05, true)});
  const double remove[3] = {0, 2, 0};
  const auto action = decide_flat(remove, scores(0, 0, std::nullopt), marker_pose());
  CHECK(sim::execute(s, action, {}, {}).second.kind == sim::OutcomeKind::kInfeasible);
}

TEST_CASE("table integration touches exactly the frustum") {
  NbvConfig cfg;
  TsdfGrid g = make_scene_grid(cfg, 0.5);
  CHECK(g.empty_of_observations());
  const auto cam = testing::top_down(0.6, 32, 40.0);
  const auto r = sim::render(scene_of({}), cam);
  integrate_into(g, r.depth, cam);
  const sim::CameraFrame f = sim::camera_frame(cam);
  long in_frustum = 0;
  for (int iz = 0; iz < g.dims[2]; ++iz)
    for (int iy = 0; iy < g.dims[1]; ++iy)
      for (int ix = 0; ix < g.dims[0]; ++ix) {
        const sim::Vec3 rel = g.center(ix, iy, iz) - cam.position;
        const double zc = sim::dot(rel, f.forward);
        const double u = std::floor(cam.intrinsics.focal * sim::dot(rel, f.right) / zc + 16.0);
        const double v = std::floor(cam.intrinsics.focal * sim::dot(rel, f.down) / zc + 16.0);
        const bool inside = zc > 0 && u >= 0 && u < 32 && v >= 0 && v < 32;
        in_frustum += inside ? 1 : 0;
        REQUIRE((g.weights[g.index(ix, iy, iz)] > 0.0) == inside);
      }
  CHECK(in_frustum > 0);
}

TEST_CASE("values stay truncated and weights never decrease") {
  NbvConfig cfg;
  TsdfGrid g = make_scene_grid(cfg, 0.5);
  const auto s = sim::generate_scene(12, 5, sim::SceneConfig{});
  std::vector<double> prev = g.weights;
  for (const auto& pose : candidate_ring(cfg, s.camera.intrinsics)) {
    const auto r = sim::render(s, pose);
    integrate_into(g, r.depth, pose);
    for (std::size_t i = 0; i < g.size(); ++i) {
      REQUIRE(std::abs(g.values[i]) <= g.truncation + 1e-15);
      REQUIRE(g.weights[i] >= prev[i]);
      REQUIRE(g.weights[i] <= g.weight_cap);
    }
    prev = g.weights;
  }
}

TEST_CASE("nan depth pixels are skipped") {
  NbvConfig cfg;
  TsdfGrid g = make_scene_grid(cfg, 0.5);
  const auto cam = testing::top_down();
  std::vector<double> nan(64 * 64, std::numeric_limits<double>::quiet_NaN());
  integrate_into(g, nan, cam);
  CHECK(g.empty_of_observations());
}

TEST_CASE("candidate ring layout") {
  NbvConfig cfg;
  const auto ring = candidate_ring(cfg, {});
  REQUIRE(ring.size() == 16);
  CHECK(ring[0].position.x == doctest::Approx(0.6 * std::cos(35.0 * M_PI / 180)));
  CHECK(ring[0].position.y == doctest::Approx(0.0));
  CHECK(ring[8].position.z == doctest::Approx(0.6 * std::sin(65.0 * M_PI / 180)));
  CHECK(ring[2].position.y > 0.5 * 0.6 * std::cos(35.0 * M_PI / 180));
  for (const auto& p : ring) CHECK_NOTHROW(sim::validate_camera(p, 0.5));
}

TEST_CASE("planner edge cases") {
  NbvConfig cfg;
  const TsdfGrid g = make_scene_grid(cfg, 0.5);
  const auto ring = candidate_ring(cfg, {});
  CHECK_THROWS_AS(plan_nbv(g, g, {}, cfg, {}, 0.5), std::invalid_argument);
  const auto one = plan_nbv(g, g, {ring[5]}, cfg, {}, 0.5);
  CHECK(one.pose == ring[5]);
  // Fully observed empty space: no view can see anything, first wins.
  TsdfGrid seen = g;
  for (auto& w : seen.weights) w = 1.0;
  for (auto& v : seen.values) v = seen.truncation;
  const auto none = plan_nbv(seen, g, ring, cfg, {}, 0.5);
  CHECK(none.index == 0);
  CHECK(none.predicted_q_target == 0.0);
  CHECK(none.predicted_q_target <= 1.0);
}

TEST_CASE("planner prefers the open side of an enclosed target") {
  // Walls on -x, -y and +y; the target can be seen sideways only from +x.
  const auto s = scene_of({box(1, -0.02, -0.02, 0.02, 0.02, 0.03, true),
                           box(2, -0.06, -0.06, -0.03, 0.06, 0.2), box(3, -0.03, -0.06, 0.06, -0.03, 0.2),
                           box(4, -0.03, 0.03, 0.06, 0.06, 0.2)});
  NbvConfig cfg;
  TsdfGrid geom = make_scene_grid(cfg, 0.5);
  TsdfGrid tgt = make_scene_grid(cfg, 0.5);
  const sim::CameraPose spawn;
  const auto r = sim::render(s, spawn);
  integrate_into(geom, r.depth, spawn);
  integrate_into(tgt, target_depth(r, 1), spawn);
  const auto ring = candidate_ring(cfg, spawn.intrinsics);
  const auto best = plan_nbv(geom, tgt, ring, cfg, {}, 0.5);
  CHECK(best.pose.position.x > 0.0);
}

TEST_CASE("flat table crosses zero within one voxel of its surface") {
  NbvConfig cfg;
  TsdfGrid g = make_scene_grid(cfg, 0.5);
  const auto cam = testing::top_down(0.6, 48, 48.0);
  integrate_into(g, sim::render(scene_of({}), cam).depth, cam);
  int columns = 0;
  for (int iy = 0; iy < g.dims[1]; ++iy)
    for (int ix = 0; ix < g.dims[0]; ++ix) {
      for (int iz = 0; iz + 1 < g.dims[2]; ++iz) {
        const std::size_t a = g.index(ix, iy, iz), b = g.index(ix, iy, iz + 1);
        if (g.weights[a] == 0.0 || g.weights[b] == 0.0) continue;
        if (g.values[a] <= 0.0 && g.values[b] > 0.0) {
          const double za = g.center(ix, iy, iz).z, zb = g.center(ix, iy, iz + 1).z;
          const double z0 = za + (zb - za) * (-g.values[a]) / (g.values[b] - g.values[a]);
          REQUIRE(std::abs(z0 - sim::kTableZ) <= g.voxel_size);
          ++columns;
          break;
        }
      }
    }
  CHECK(columns > 100);
}

TEST_CASE("fusing the same view twice leaves values unchanged") {
  NbvConfig cfg;
  const auto s = sim::generate_scene(10, 21, sim::SceneConfig{});
  const auto r = sim::render(s, s.camera);
  TsdfGrid once = make_scene_grid(cfg, 0.5);
  integrate_into(once, r.depth, s.camera);
  TsdfGrid twice = once;
  integrate_into(twice, r.depth, s.camera);
  for (std::size_t i = 0; i < once.size(); ++i) {
    REQUIRE(twice.values[i] == doctest::Approx(once.values[i]).epsilon(1e-12));
    REQUIRE(twice.weights[i] == (once.weights[i] > 0 ? 2.0 : 0.0));
  }
}
