#include <doctest.h>

#include <random>
#include <sstream>

#include "activetrack/errors.hpp"
#include "activetrack/evalkit.hpp"
#include "activetrack/scenario.hpp"
#include "activetrack/texture.hpp"
#include "oracles.hpp"

using namespace activetrack;

namespace {

class ConstantAgent : public Agent {
 public:
  explicit ConstantAgent(int a) : a_(a) {}
  void begin_episode(const Observation&, std::uint64_t) override {}
  Action act(const Observation&) override { return Action::discrete(ActionSpace::kDiscrete6, a_); }

 private:
  int a_;
};

// Straight corridor where the target moves at the tracker's forward speed,
// so always moving forward is perfect following.
WorldSpec corridor() {
  WorldSpec s;
  s.bounds = {{-5, -5}, {80, 5}};
  s.walls = {{{{-5, -5}, {80, -5}}, tex::kBrick}, {{{80, -5}, {80, 5}}, tex::kBrick},
             {{{80, 5}, {-5, 5}}, tex::kBrick}, {{{-5, 5}, {-5, -5}}, tex::kBrick}};
  s.floor_texture = tex::kFloor;
  s.ceiling_texture = tex::kCeiling;
  s.tracker_start = {0, 0, 0};
  s.target.initial = {2, 0, 0};
  s.target.appearance = tex::kMonster;
  s.target.trajectory.waypoints = {{2, 0}, {78, 0}};
  s.target.trajectory.speed = 0.25;
  return s;
}

EnvSetup setup(int max_steps) {
  CameraConfig cam;
  cam.width = cam.height = 32;
  EpisodeConfig ep;
  ep.max_steps = max_steps;
  ep.reward_threshold = -75;
  return {std::make_shared<const TexturePool>(builtin_texture_pool()), cam, {}, ep, {}};
}

}  // namespace

TEST_CASE("perfect follower on a straight path") {
  ConstantAgent forward(d6::kForward);
  std::vector<EpisodeLog> logs;
  const EvalReport rep = evaluate(forward, setup(120), single_env_pool(corridor()), 3, 1, 60, &logs);
  CHECK(rep.success_rate == 1.0);
  CHECK(rep.ar.mean == doctest::Approx(120.0));
  CHECK(std::abs(rep.deviation.mean) < 0.05);
}

TEST_CASE("standing still while the target walks away fails by threshold") {
  ConstantAgent idle(d6::kNoOp);
  std::vector<EpisodeLog> logs;
  const EvalReport rep =
      evaluate(idle, setup(500), single_env_pool(make_scenario("training").spec), 2, 3, 60, &logs);
  CHECK(rep.success_rate == 0.0);
  for (const auto& l : logs) CHECK(l.summary.done_reason == DoneReason::kThreshold);
}

TEST_CASE("report means agree with a pass over the logs") {
  std::mt19937_64 rng(1);
  struct RandomAgent : Agent {
    std::mt19937_64 r;
    void begin_episode(const Observation&, std::uint64_t seed) override { r.seed(seed); }
    Action act(const Observation&) override {
      return Action::discrete(ActionSpace::kDiscrete6, static_cast<int>(r() % 6));
    }
  } agent;
  std::vector<EpisodeLog> logs;
  const auto pool = build_pool(make_scenario("training").spec, {}, 5);
  const EvalReport rep = evaluate(agent, setup(200), pool, 6, 9, 60, &logs);
  double ar = 0, el = 0;
  for (const auto& l : logs) {
    double sum = 0;
    for (const auto& s : l.steps) sum += s.reward;
    CHECK(std::abs(sum - l.summary.accumulated_reward) < 1e-9);
    ar += sum;
    el += static_cast<double>(l.steps.size());
  }
  CHECK(std::abs(rep.ar.mean - ar / logs.size()) < 1e-9);
  CHECK(std::abs(rep.el.mean - el / logs.size()) < 1e-9);

  std::vector<EpisodeLog> again;
  const EvalReport rep2 = evaluate(agent, setup(200), pool, 6, 9, 60, &again);
  CHECK(rep2.ar.mean == rep.ar.mean);
  for (size_t i = 0; i < logs.size(); ++i) CHECK(again[i].steps == logs[i].steps);
}

TEST_CASE("success classification around the lost window") {
  const int W = 60;
  auto pattern = [&](int lost) {
    std::vector<bool> v(300, true);
    for (int k = 100; k < 100 + lost; ++k) v[k] = false;
    return v;
  };
  CHECK(classify_success(oracle::synthetic_log(std::vector<bool>(300, true), true), W).success);
  CHECK(classify_success(oracle::synthetic_log(pattern(W - 1), true), W).success);
  const SuccessResult at = classify_success(oracle::synthetic_log(pattern(W), true), W);
  CHECK_FALSE(at.success);
  REQUIRE(at.failed_at);
  CHECK(*at.failed_at == 101 + W - 1);
  CHECK_FALSE(classify_success(oracle::synthetic_log(pattern(W + 1), true), W).success);
  CHECK_FALSE(classify_success(oracle::synthetic_log(std::vector<bool>(300, true), false), W).success);
  CHECK_THROWS_AS(classify_success(oracle::synthetic_log(pattern(3), true), 0), ConfigError);
}

TEST_CASE("recovery statistics") {
  CHECK(recovery_stats({oracle::synthetic_log(std::vector<bool>(50, true), true)}).latencies.empty());
  std::vector<bool> v(100, true);
  for (int k = 30; k < 42; ++k) v[k] = false;
  const RecoveryStats one = recovery_stats({oracle::synthetic_log(v, true)});
  REQUIRE(one.latencies.size() == 1);
  CHECK(one.latencies[0] == 12);
  CHECK(one.median == 12.0);

  std::mt19937_64 rng(3);
  std::vector<EpisodeLog> logs;
  for (int e = 0; e < 20; ++e) {
    std::vector<bool> vis(400);
    bool cur = true;
    for (auto&& b : vis) {
      if (rng() % 17 == 0) cur = !cur;
      b = cur;
    }
    logs.push_back(oracle::synthetic_log(vis, true));
  }
  CHECK(recovery_stats(logs, 60).latencies == oracle::naive_latencies(logs, 60));
}

TEST_CASE("report writers carry a version header") {
  ConstantAgent forward(d6::kForward);
  const EvalReport rep = evaluate(forward, setup(30), single_env_pool(corridor()), 2, 1);
  std::stringstream txt, csv;
  write_report_text(txt, rep, "unit");
  write_report_csv(csv, rep);
  std::string first;
  std::getline(txt, first);
  CHECK(first == "# activetrack-eval v1");
  std::getline(csv, first);
  CHECK(first.rfind("episode,ar,el", 0) == 0);
  int rows = 0;
  while (std::getline(csv, first)) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("replay reproduces logged frames, flipped or not") {
  const auto pool = build_pool(make_scenario("training").spec, {}, 8);
  struct Wiggle : Agent {
    int k = 0;
    void begin_episode(const Observation&, std::uint64_t) override { k = 0; }
    Action act(const Observation&) override {
      return Action::discrete(ActionSpace::kDiscrete6, (k++ / 3) % 6);
    }
  } agent;
  std::vector<EpisodeLog> logs;
  evaluate(agent, setup(60), pool, 4, 2, 60, &logs);
  bool saw_flip = false;
  for (const auto& log : logs) {
    saw_flip = saw_flip || log.flipped;
    const auto frames = replay_frames(log, setup(60));
    REQUIRE(frames.size() == log.steps.size() + 1);
    for (size_t k = 0; k < log.steps.size(); ++k) {
      CHECK(observation_hash(frames[k + 1]) == log.steps[k].obs_hash);
      CHECK(target_bbox(frames[k + 1]) == log.steps[k].bbox);
    }
  }
  CHECK(saw_flip);
  EpisodeLog broken = logs[0];
  broken.steps[2].obs_hash ^= 1;
  CHECK_THROWS_AS(replay_frames(broken, setup(60)), FormatError);
}
