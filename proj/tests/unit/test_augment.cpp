#include <doctest.h>

#include <map>
#include <random>

#include "activetrack/augment.hpp"
#include "activetrack/errors.hpp"
#include "activetrack/scenario.hpp"

using namespace activetrack;

namespace {

// 99th percentile of chi-square with 41 degrees of freedom.
constexpr double kChi2_41_99 = 64.95;

double chi_square(const std::vector<int>& counts, double expected) {
  double x = 0.0;
  for (int c : counts) x += (c - expected) * (c - expected) / expected;
  return x;
}

}  // namespace

TEST_CASE("pool sizes") {
  const WorldSpec base = make_scenario("training").spec;
  AugmentConfig cfg;
  CHECK(build_pool(base, cfg, 1).size() == 42);

  cfg.n_perturb = 1;
  cfg.enable_flip = false;
  const EnvironmentPool one = build_pool(base, cfg, 9);
  REQUIRE(one.size() == 1);
  WorldSpec only_start_differs = *one.variants[0].spec;
  only_start_differs.tracker_start = base.tracker_start;
  CHECK(only_start_differs == base);
  CHECK_FALSE(one.variants[0].flipped);
}

TEST_CASE("pooled starts respect ranges and clearance") {
  const WorldSpec base = make_scenario("training").spec;
  AugmentConfig cfg;
  const EnvironmentPool pool = build_pool(base, cfg, 4);
  for (size_t i = 0; i < pool.size(); i += 2) {
    const WorldSpec& s = *pool.variants[i].spec;
    CHECK(is_free(s, s.tracker_start.position(), s.tracker_radius));
    CHECK(wall_clearance(s, s.target.initial.position()) > s.target.radius);
    const RelativePose rel = relative_pose(s.tracker_start, s.target.initial);
    CHECK(rel.x >= cfg.perturb_x.lo - 1e-9);
    CHECK(rel.x <= cfg.perturb_x.hi + 1e-9);
    CHECK(rel.y >= cfg.perturb_y.lo - 1e-9);
    CHECK(rel.y <= cfg.perturb_y.hi + 1e-9);
    CHECK(*pool.variants[i + 1].spec == mirror_world(s));
    CHECK(pool.variants[i + 1].flipped);
  }
}

TEST_CASE("infeasible perturbation is reported") {
  const WorldSpec base = make_scenario("training").spec;
  AugmentConfig cfg;
  cfg.perturb_y = {40, 50};  // always outside the room
  CHECK_THROWS_AS(build_pool(base, cfg, 1), PerturbationInfeasible);
}

TEST_CASE("episode sampling is uniform over the pool") {
  const EnvironmentPool pool = build_pool(make_scenario("training").spec, {}, 2);
  std::mt19937_64 rng(11);
  std::map<const WorldSpec*, int> index;
  for (size_t i = 0; i < pool.size(); ++i) index[pool.variants[i].spec.get()] = static_cast<int>(i);
  std::vector<int> counts(pool.size(), 0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) ++counts[index.at(sample_episode_env(pool, rng).spec.get())];
  CHECK(chi_square(counts, static_cast<double>(draws) / pool.size()) < kChi2_41_99);

  const EnvironmentPool single = single_env_pool(make_scenario("training").spec);
  for (int k = 0; k < 20; ++k) CHECK(&sample_episode_env(single, rng) == &single.variants[0]);
  CHECK_THROWS_AS(sample_episode_env(EnvironmentPool{}, rng), InvalidWorld);
}

TEST_CASE("appearance randomisation") {
  const WorldSpec base = make_scenario("standard").spec;
  AugmentConfig cfg;
  std::mt19937_64 rng(1);
  const WorldSpec one = randomize_appearance(base, cfg, 1, rng);
  for (const auto& w : one.walls) CHECK(w.texture == 0);
  CHECK(one.floor_texture == 0);
  CHECK(one.target.appearance == 0);
  CHECK_THROWS_AS(randomize_appearance(base, cfg, 0, rng), EmptyTexturePool);

  cfg.light_intensity = {0.3, 0.9};
  for (int k = 0; k < 200; ++k) {
    const WorldSpec s = randomize_appearance(base, cfg, 19, rng);
    CHECK(cfg.light_intensity.contains(s.light.intensity));
  }

  std::mt19937_64 r1(100), r2(200);
  const WorldSpec a = randomize_appearance(base, cfg, 19, r1);
  const WorldSpec b = randomize_appearance(base, cfg, 19, r2);
  bool differ = a.floor_texture != b.floor_texture || a.ceiling_texture != b.ceiling_texture;
  for (size_t i = 0; i < a.walls.size(); ++i) differ = differ || a.walls[i].texture != b.walls[i].texture;
  CHECK(differ);
}

TEST_CASE("trajectory randomisation") {
  const WorldSpec base = make_scenario("training").spec;
  AugmentConfig cfg;
  cfg.speed = {0.01, 0.15};
  std::mt19937_64 rng(8);
  for (int k = 0; k < 100; ++k) {
    const WorldSpec s = randomize_trajectory(base, cfg, rng);
    CHECK(cfg.speed.contains(s.target.trajectory.speed));
    const auto& wp = s.target.trajectory.waypoints;
    REQUIRE(wp.size() >= 2);
    for (size_t i = 0; i + 1 < wp.size(); ++i) CHECK(segment_clear(s, wp[i], wp[i + 1], s.target.radius));
  }
  cfg.speed = {0.05, 0.05};
  CHECK(randomize_trajectory(base, cfg, rng).target.trajectory.speed == 0.05);
}

TEST_CASE("next_start rules") {
  const WorldSpec s = make_scenario("training").spec;
  AugmentConfig cfg;
  cfg.resume_from_failure = true;
  CHECK(next_start(nullptr, s, cfg) == s.tracker_start);

  EpisodeLog failed;
  failed.summary.done_reason = DoneReason::kThreshold;
  StepRecord last;
  last.tracker = {3.5, -1.25, 0.7};
  failed.steps.push_back(last);
  CHECK(next_start(&failed, s, cfg) == last.tracker);

  EpisodeLog finished = failed;
  finished.summary.done_reason = DoneReason::kMaxSteps;
  CHECK(next_start(&finished, s, cfg) == s.tracker_start);

  cfg.resume_from_failure = false;
  CHECK(next_start(&failed, s, cfg) == s.tracker_start);
}

TEST_CASE("background hiding respects its probability") {
  const WorldSpec base = make_scenario("training").spec;
  AugmentConfig cfg;
  std::mt19937_64 rng(2);
  cfg.hide_background_probability = 0.0;
  for (const auto& o : randomize_background(base, cfg, rng).background_objects) CHECK(o.visible);
  cfg.hide_background_probability = 1.0;
  for (const auto& o : randomize_background(base, cfg, rng).background_objects) CHECK_FALSE(o.visible);
}
