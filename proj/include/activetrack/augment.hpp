#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "activetrack/env.hpp"
#include "activetrack/world.hpp"

namespace activetrack {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const { return lo <= hi; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Perturbation ranges are over the target's initial pose as seen from the
/// tracker (frame S): x rightward, y forward, omega relative heading.
struct AugmentConfig {
  int n_perturb = 21;
  bool enable_flip = true;
  Range perturb_x{-1.5, 1.5};
  Range perturb_y{0.5, 4.5};
  Range perturb_omega{-std::numbers::pi, std::numbers::pi};

  double hide_background_probability = 0.0;
  bool resume_from_failure = false;

  bool randomize_appearance = false;
  std::string texture_pool_path;  // empty: built-in pool
  Range light_intensity{0.4, 1.0};
  std::array<Range, 3> tint{Range{0.7, 1.0}, Range{0.7, 1.0}, Range{0.7, 1.0}};

  bool resample_goals = false;
  int goals_per_episode = 4;
  Range speed{0.008, 0.12};  // world units per step
  Range zigzag_amplitude{0.0, 0.3};
  std::array<int, 2> zigzag_period{20, 60};

  /// Throws ConfigError for empty or unordered ranges.
  void validate() const;
  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// Immutable set of map variants. With flips on, entry 2i is the i-th
/// perturbed map and entry 2i+1 its mirror.
struct EnvironmentPool {
  std::vector<EnvVariant> variants;
  size_t size() const { return variants.size(); }
  bool empty() const { return variants.empty(); }
};

/// Moves the tracker start so the target appears at `rel` in frame S.
WorldSpec place_tracker_for(const WorldSpec& base, const RelativePose& rel);

/// Throws PerturbationInfeasible after 1000 rejected draws for one variant.
EnvironmentPool build_pool(const WorldSpec& base, const AugmentConfig& cfg, std::uint64_t seed);

/// Pool holding just `spec`, unflipped.
EnvironmentPool single_env_pool(const WorldSpec& spec);

const EnvVariant& sample_episode_env(const EnvironmentPool& pool, std::mt19937_64& rng);

/// Redraws every surface texture id from [0, texture_count) and the light.
/// Throws EmptyTexturePool when texture_count is zero.
WorldSpec randomize_appearance(const WorldSpec& spec, const AugmentConfig& cfg, int texture_count,
                               std::mt19937_64& rng);

/// New target path through `goals_per_episode` goals drawn from free cells,
/// each leg from the planner, plus a fresh speed and zig-zag. NoPath from
/// the planner propagates.
WorldSpec randomize_trajectory(const WorldSpec& spec, const AugmentConfig& cfg,
                               std::mt19937_64& rng);

/// Hides each background object with the configured probability.
WorldSpec randomize_background(const WorldSpec& spec, const AugmentConfig& cfg,
                               std::mt19937_64& rng);

/// Start pose for the next episode: where the last one failed when resuming
/// is on, else the map's own start.
Pose next_start(const EpisodeLog* previous, const WorldSpec& spec, const AugmentConfig& cfg);

struct EpisodePlan {
  EnvVariant variant;
  std::optional<Pose> tracker_start;
};

/// Pool draw plus whichever per-episode randomisations are enabled.
EpisodePlan plan_episode(const EnvironmentPool& pool, const AugmentConfig& cfg, int texture_count,
                         std::mt19937_64& rng, const EpisodeLog* previous = nullptr);

}  // namespace activetrack
