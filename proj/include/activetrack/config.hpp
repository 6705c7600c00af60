#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "activetrack/a3c.hpp"
#include "activetrack/augment.hpp"
#include "activetrack/baseline.hpp"
#include "activetrack/env.hpp"
#include "activetrack/net.hpp"
#include "activetrack/render.hpp"

namespace activetrack {

enum class Preset { kPaper, kDesk };
std::string_view to_string(Preset p);
Preset preset_from_string(std::string_view s);

struct EvalSettings {
  int episodes = 30;
  int lost_window = kDefaultLostWindow;
};

/// Everything a CLI run needs. Loaded as JSON on top of a preset; unknown
/// keys are rejected with their dotted path.
struct RunConfig {
  Preset preset = Preset::kDesk;
  std::string scenario = "training";
  std::uint64_t seed = 0;
  std::string out = "runs/default";
  std::uint64_t pool_seed = 1;  // seed of the perturbed-start pool
  bool randomized_pool = true;  // false trains on the scenario's own start only
  CameraConfig camera;
  RewardParams reward;
  EpisodeConfig episode;
  AugmentConfig augment;
  TrainConfig train;
  NetConfig net;
  EvalSettings eval;
  CameraController controller;

  /// Checks every nested block and input/camera agreement.
  void validate() const;
};

RunConfig preset_config(Preset preset);

/// Applies a JSON document to `base`. Throws ConfigError naming the key path.
/// A top-level "preset" key is accepted but not applied here.
RunConfig apply_config_json(RunConfig base, const std::string& text);
/// Preset precedence: `preset` argument, then the file's "preset" key, then desk.
RunConfig load_run_config(const std::string& path, std::optional<Preset> preset = std::nullopt);
std::string run_config_to_json(const RunConfig& cfg);

/// Copies seed, input size and action space into the nested blocks.
void sync_derived(RunConfig& cfg);

/// Built-in textures, or the directory named by augment.texture_pool_path.
std::shared_ptr<const TexturePool> load_textures(const RunConfig& cfg);
EnvSetup make_env_setup(const RunConfig& cfg, std::shared_ptr<const TexturePool> textures);

/// Training pool from pool_seed; validation draws from pool_seed + 1.
TrainingData make_training_data(const RunConfig& cfg, std::shared_ptr<const TexturePool> textures);

/// The scenario's own start, or a perturbed pool from pool_seed + 2 that
/// training never saw.
EnvironmentPool make_eval_pool(const RunConfig& cfg, bool perturbed_starts);

}  // namespace activetrack
