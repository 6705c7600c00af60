#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "activetrack/augment.hpp"
#include "activetrack/env.hpp"
#include "activetrack/net.hpp"

namespace activetrack {

/// Anything that turns observations into actions, one episode at a time.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode(const Observation& first, std::uint64_t episode_seed) = 0;
  virtual Action act(const Observation& obs) = 0;
};

/// Everything needed to build env instances for evaluation or training.
struct EnvSetup {
  std::shared_ptr<const TexturePool> textures;
  CameraConfig camera;
  RewardParams reward;
  EpisodeConfig episode;
  MotionScale scale;
};

inline constexpr int kDefaultLostWindow = 60;  // 3 s at 20 Hz

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};
MeanStd mean_std(const std::vector<double>& values);

/// Run of consecutive steps without target pixels, as 1-based step numbers.
struct LossInterval {
  std::int64_t first = 0;
  std::int64_t last = 0;
  std::int64_t length() const { return last - first + 1; }
  friend bool operator==(const LossInterval&, const LossInterval&) = default;
};

struct SuccessResult {
  bool success = false;
  std::vector<LossInterval> intervals;
  std::optional<std::int64_t> failed_at;  // step where a run reached lost_window
};

/// Success iff the episode reached max_steps and no loss run lasted
/// `lost_window` steps or more.
SuccessResult classify_success(const EpisodeLog& log, int lost_window = kDefaultLostWindow);

struct RecoveryEvent {
  int episode = 0;
  std::int64_t lost_at = 0;
  std::optional<std::int64_t> reacquired_at;
  friend bool operator==(const RecoveryEvent&, const RecoveryEvent&) = default;
};

struct RecoveryStats {
  std::vector<std::int64_t> latencies;  // sorted ascending
  std::map<std::int64_t, int> histogram;
  std::optional<double> median;
};

/// Latency of every loss shorter than `lost_window` that ended with the
/// target back in view.
RecoveryStats recovery_stats(const std::vector<EpisodeLog>& logs,
                             int lost_window = kDefaultLostWindow);

struct EpisodeRow {
  int episode = 0;
  double ar = 0.0;
  std::int64_t el = 0;
  DoneReason done_reason = DoneReason::kNone;
  bool success = false;
  double target_size_mean = 0.0;
  double deviation_mean = 0.0;
  int visible_steps = 0;
  bool flipped = false;
};

struct EvalReport {
  int episodes = 0;
  MeanStd ar;
  MeanStd el;
  double success_rate = 0.0;
  MeanStd target_size;  // bbox area over image area, visible frames only
  MeanStd deviation;    // signed centre offset over half image width
  std::vector<RecoveryEvent> recovery;
  std::vector<EpisodeRow> rows;
};

/// Pure post-processing of finished logs.
EvalReport summarize(const std::vector<EpisodeLog>& logs, int lost_window = kDefaultLostWindow);

/// Runs `episodes` episodes on variants drawn from `pool`. Episode i uses
/// seed-derived streams only, so results are reproducible.
EvalReport evaluate(Agent& agent, const EnvSetup& setup, const EnvironmentPool& pool, int episodes,
                    std::uint64_t seed, int lost_window = kDefaultLostWindow,
                    std::vector<EpisodeLog>* logs = nullptr);

/// Signed per-frame deviation: (cx - (W-1)/2) / (W/2).
double center_deviation(const BoundingBox& box, int width);

/// Key/value text report and per-episode CSV.
void write_report_text(std::ostream& out, const EvalReport& report, const std::string& label);
void write_report_csv(std::ostream& out, const EvalReport& report);

/// Physical frames of a logged episode, re-simulated from its actions:
/// frame 0 is the reset view and frame k follows step k. Throws FormatError
/// when a re-rendered frame disagrees with the logged hash.
std::vector<Observation> replay_frames(const EpisodeLog& log, const EnvSetup& setup);

struct SaliencyFrame {
  std::int64_t step = 0;  // the step whose action was taken from `view`
  Observation view;       // as the agent saw it
  Action action;          // in the agent's frame
  std::vector<double> map;
};

/// Saliency of the logged action for steps first..last (1-based, inclusive),
/// with the recurrent state rebuilt from the start of the episode.
std::vector<SaliencyFrame> saliency_frames(const NetworkParams& params, const EpisodeLog& log,
                                           const EnvSetup& setup, std::int64_t first,
                                           std::int64_t last);

/// Frame darkened and tinted red by saliency, as binary PPM.
void write_saliency_overlay(const std::string& path, const SaliencyFrame& frame);

/// Deterministic stream for episode `index` of an evaluation seeded with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace activetrack
