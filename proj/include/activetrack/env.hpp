#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "activetrack/actionmap.hpp"
#include "activetrack/render.hpp"
#include "activetrack/world.hpp"

namespace activetrack {

/// Reward r = A - (sqrt(x^2 + (y - d)^2) / c + lambda * |omega|).
struct RewardParams {
  double A = 1.0;
  double d = 2.0;
  double c = 2.0;
  double lambda = 0.5;

  void validate() const;
};

double compute_reward(const RelativePose& rel, const RewardParams& p);

struct EpisodeConfig {
  double reward_threshold = -450.0;
  int max_steps = 3000;
  ActionSpace action_space = ActionSpace::kDiscrete6;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class DoneReason { kNone, kThreshold, kMaxSteps };
std::string_view to_string(DoneReason r);
DoneReason done_reason_from_string(std::string_view s);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;
  RelativePose info;
};

struct StepRecord {
  std::int64_t step = 0;
  Action action;
  double reward = 0.0;
  RelativePose rel;
  std::optional<BoundingBox> bbox;  // ground-truth target box in the physical frame
  Pose tracker;
  Pose target;
  std::uint64_t obs_hash = 0;  // of the physical frame
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpisodeSummary {
  double accumulated_reward = 0.0;  // AR
  std::int64_t episode_length = 0;  // EL
  DoneReason done_reason = DoneReason::kNone;
  friend bool operator==(const EpisodeSummary&, const EpisodeSummary&) = default;
};

inline constexpr int kEpisodeLogVersion = 1;

/// Per-episode record. The world here is the simulated (physical) map; the
/// flipped flag says the agent saw it mirrored with left/right swapped.
struct EpisodeLog {
  WorldSpec world;
  CameraConfig camera;
  bool flipped = false;
  ActionSpace action_space = ActionSpace::kDiscrete6;
  int max_steps = 0;
  double reward_threshold = 0.0;
  std::vector<StepRecord> steps;
  EpisodeSummary summary;

  bool reached_max_steps() const { return summary.done_reason == DoneReason::kMaxSteps; }
  std::optional<Pose> final_tracker_pose() const;
};

/// FNV-1a over the RGB buffer bytes.
std::uint64_t observation_hash(const Observation& obs);

/// Line-delimited JSON: header line, one line per step, summary line.
void write_episode_log(std::ostream& out, const EpisodeLog& log);
EpisodeLog read_episode_log(std::istream& in);
void save_episode_log(const EpisodeLog& log, const std::string& path);
EpisodeLog load_episode_log(const std::string& path);

/// Map variant handed to the env at reset. A flipped variant holds the
/// mirrored map as the agent sees it; the env simulates the original one.
struct EnvVariant {
  std::shared_ptr<const WorldSpec> spec;
  bool flipped = false;
};

/// Episode orchestration around one world instance. Not thread-safe; one
/// env per worker.
class TrackingEnv {
 public:
  TrackingEnv(std::shared_ptr<const TexturePool> textures, CameraConfig camera,
              RewardParams reward, EpisodeConfig episode, MotionScale scale = {});

  /// Starts a new episode; `tracker_start` overrides the map's start pose.
  Observation reset(const EnvVariant& variant, std::optional<Pose> tracker_start = std::nullopt);
  Observation reset(const WorldSpec& spec) {
    return reset(EnvVariant{std::make_shared<const WorldSpec>(spec), false});
  }

  /// Advances target then tracker, renders, and scores the post-step pose.
  /// Throws InvalidAction for actions outside the configured space or when
  /// called after the episode ended.
  StepResult step(const Action& action);

  const WorldState& state() const { return state_; }
  const WorldSpec& simulated_world() const { return world_; }
  const EpisodeLog& log() const { return log_; }
  bool done() const { return done_; }
  double accumulated_reward() const { return log_.summary.accumulated_reward; }
  const CameraConfig& camera() const { return camera_; }
  const RewardParams& reward_params() const { return reward_; }
  const EpisodeConfig& episode_config() const { return episode_; }
  const TexturePool& textures() const { return *textures_; }

  /// Observation as the agent sees it for the current state.
  Observation render() const;

 private:
  std::shared_ptr<const TexturePool> textures_;
  CameraConfig camera_;
  RewardParams reward_;
  EpisodeConfig episode_;
  MotionScale scale_;
  WorldSpec world_;
  WorldState state_;
  bool flipped_ = false;
  bool done_ = true;
  EpisodeLog log_;
};

}  // namespace activetrack
