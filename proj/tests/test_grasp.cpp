#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "xpg/core/random.hpp"
#include "xpg/grasp/oracle.hpp"
#include "xpg/sim/render.hpp"

using namespace xpg;
using namespace xpg::grasp;
using testing::box;
using testing::scene_of;

namespace {

// Recomputes one object's score from scratch: lone render for the projection,
// grid sampling for the clearance ring.
double brute_score(const sim::SceneState& s, int id, const OracleConfig& cfg) {
  const auto full = sim::render(s, s.camera);
  sim::SceneState alone = s;
  for (auto& o : alone.objects) o.removed = o.removed || o.id != id;
  const auto lone = sim::render(alone, s.camera);
  const double vis_px = static_cast<double>(std::count(full.instance.begin(), full.instance.end(), id));
  const double proj = static_cast<double>(std::count(lone.instance.begin(), lone.instance.end(), id));
  const double vis = proj > 0 ? vis_px / proj : 0.0;
  return object_score(vis, clearance(s, *s.find(id), cfg.clearance_radius), cfg);
}

double sampled_clearance(const sim::SceneState& s, const sim::ObjectInstance& obj, double r, int n) {
  const sim::Rect ring = obj.footprint.expanded(r);
  long inside = 0, free = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = ring.x0 + (i + 0.5) * ring.width() / n;
      const double y = ring.y0 + (j + 0.5) * ring.depth() / n;
      if (obj.footprint.contains(x, y)) continue;
      ++inside;
      bool hit = false;
      for (const auto& o : s.objects)
        if (!o.removed && o.id != obj.id && o.footprint.contains(x, y)) hit = true;
      free += hit ? 0 : 1;
    }
  return static_cast<double>(free) / static_cast<double>(inside);
}

}  // namespace

TEST_CASE("a lone fully visible object scores one") {
  const auto s = scene_of({box(1, -0.04, -0.04, 0.04, 0.04, 0.05, true)}, testing::top_down());
  const auto sc = score_scene(s, sim::render(s, s.camera), {});
  CHECK(sc.q_target == 1.0);
  CHECK(sc.q_occlude == 0.0);
  CHECK_FALSE(sc.best_occluder.has_value());
  CHECK(sc.target_clearance == 1.0);
}

TEST_CASE("a fully occluded target scores zero") {
  const auto s = scene_of({box(1, -0.02, 0.05, 0.02, 0.08, 0.03, true), box(2, -0.08, -0.05, 0.08, 0.0, 0.3)});
  const auto sc = score_scene(s, sim::render(s, s.camera), {});
  CHECK(sc.q_target == 0.0);
  CHECK(sc.best_occluder == 2);
  CHECK(sc.q_occlude > 0.0);
}

TEST_CASE("best occluder matches a direct recomputation on three-object scenes") {
  Rng rng(8);
  const OracleConfig cfg;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<sim::ObjectInstance> objs;
    for (int i = 1; i <= 3; ++i) {
      const double x = rng.uniform(-0.2, 0.12), y = rng.uniform(-0.2, 0.12);
      objs.push_back(box(i, x, y, x + rng.uniform(0.03, 0.08), y + rng.uniform(0.03, 0.08),
                         rng.uniform(0.03, 0.15), i == 1));
    }
    const auto s = scene_of(objs);
    const auto sc = score_scene(s, sim::render(s, s.camera), cfg);
    double best = 0.0;
    int best_id = -1;
    for (int id = 1; id <= 3; ++id) {
      const double q = brute_score(s, id, cfg);
      CHECK(sc.per_object.at(id) == doctest::Approx(q).epsilon(1e-12));
      if (id != 1 && q > 0.0 && (best_id < 0 || q > best)) {
        best = q;
        best_id = id;
      }
    }
    CHECK(sc.q_target == doctest::Approx(brute_score(s, 1, cfg)));
    if (best_id > 0) {
      CHECK(sc.q_occlude == doctest::Approx(best));
      CHECK(sc.per_object.at(*sc.best_occluder) == sc.q_occlude);
    }
  }
}

TEST_CASE("q_occlude is the max over the stored map") {
  sim::SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sim::generate_scene(15, seed, cfg);
    const auto r = sim::render(s, s.camera);
    const auto sc = score_scene(s, r, {});
    double mx = 0.0;
    for (const auto& [id, q] : sc.per_object) {
      CHECK(q >= 0.0);
      CHECK(q <= 1.0);
      const bool visible = std::count(r.instance.begin(), r.instance.end(), id) > 0;
      if (id != s.target_id() && visible) mx = std::max(mx, q);
    }
    CHECK(sc.q_occlude == mx);
    CHECK(sc.q_target == sc.per_object.at(s.target_id()));
  }
}

TEST_CASE("clearance is exact against dense sampling") {
  sim::SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = sim::generate_scene(20, seed, cfg);
    for (const auto& o : s.objects) {
      const double exact = clearance(s, o, 0.03);
      CHECK(exact == doctest::Approx(sampled_clearance(s, o, 0.03, 400)).epsilon(0.01));
    }
  }
  CHECK(clearance(sim::generate_scene(5, 1, cfg), sim::generate_scene(5, 1, cfg).objects[0], 0.0) == 1.0);
}

TEST_CASE("score is monotone in visibility") {
  const OracleConfig cfg;
  for (double c : {0.2, 0.5, 1.0})
    for (double v = 0.0; v < 1.0; v += 0.05) CHECK(object_score(v, c, cfg) <= object_score(v + 0.05, c, cfg));
  CHECK(object_score(0.0, 1.0, cfg) == 0.0);
  OracleConfig sq;
  sq.alpha = 2.0;
  CHECK(object_score(0.5, 1.0, sq) == doctest::Approx(0.25));
}

TEST_CASE("uncovering an object raises its score") {
  // Removing the front box raises the back box's visible pixel count.
  const auto s = scene_of({box(1, -0.05, 0.05, 0.05, 0.1, 0.06, true), box(2, -0.02, -0.05, 0.02, -0.02, 0.2)});
  const auto before = score_scene(s, sim::render(s, s.camera), {});
  auto t = s;
  t.objects[1].removed = true;
  const auto after = score_scene(t, sim::render(t, t.camera), {});
  CHECK(after.q_target > before.q_target);
}

TEST_CASE("strict occluders only name ray-blocking objects") {
  const auto s = scene_of({box(1, -0.05, 0.05, 0.05, 0.1, 0.06, true), box(2, -0.02, 0.01, 0.02, 0.04, 0.2),
                           box(3, 0.1, -0.15, 0.14, -0.11, 0.05)});
  OracleConfig strict;
  strict.strict_occluders = true;
  const auto r = sim::render(s, s.camera);
  const auto sc = score_scene(s, r, strict);
  CHECK(sc.best_occluder == 2);
  const auto loose = score_scene(s, r, {});
  // Object 2 crowds the target, so the isolated object 3 scores higher.
  CHECK(loose.per_object.at(3) > loose.per_object.at(2));
  CHECK(loose.best_occluder == 3);
}
