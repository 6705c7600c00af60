#include "activetrack/augment.hpp"

#include <cmath>

#include "activetrack/errors.hpp"

namespace activetrack {

void AugmentConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(n_perturb >= 1, "augment.n_perturb must be >= 1");
  need(perturb_x.valid() && perturb_y.valid() && perturb_omega.valid(),
       "augment perturbation ranges must satisfy lo <= hi");
  need(hide_background_probability >= 0.0 && hide_background_probability <= 1.0,
       "augment.hide_background_probability must be in [0,1]");
  need(light_intensity.valid() && light_intensity.lo >= 0.0 && light_intensity.hi <= 1.0,
       "augment.light_intensity must be an ordered range inside [0,1]");
  for (const auto& t : tint)
    need(t.valid() && t.lo >= 0.0 && t.hi <= 1.0, "augment.tint ranges must be ordered inside [0,1]");
  need(speed.valid() && speed.lo >= 0.0, "augment.speed must be an ordered nonnegative range");
  need(zigzag_amplitude.valid(), "augment.zigzag_amplitude must satisfy lo <= hi");
  need(zigzag_period[0] >= 1 && zigzag_period[0] <= zigzag_period[1],
       "augment.zigzag_period must be an ordered range of positive steps");
  need(goals_per_episode >= 1, "augment.goals_per_episode must be >= 1");
}

namespace {

double draw(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

WorldSpec place_tracker_for(const WorldSpec& base, const RelativePose& rel) {
  WorldSpec spec = base;
  const Pose& t = base.target.initial;
  const double heading = normalize_angle(t.heading - rel.omega);
  const Vec2 offset = to_world(Pose{0.0, 0.0, heading}, Vec2{rel.x, rel.y});
  spec.tracker_start = Pose{t.x - offset.x, t.y - offset.y, heading};
  return spec;
}

EnvironmentPool build_pool(const WorldSpec& base, const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  validate(base);
  std::mt19937_64 rng(seed);
  EnvironmentPool pool;
  const double min_gap = base.tracker_radius + base.target.radius;
  for (int i = 0; i < cfg.n_perturb; ++i) {
    int rejected = 0;
    for (;;) {
      const RelativePose rel{draw(cfg.perturb_x, rng), draw(cfg.perturb_y, rng),
                             draw(cfg.perturb_omega, rng)};
      WorldSpec spec = place_tracker_for(base, rel);
      const bool ok = is_free(spec, spec.tracker_start.position(), spec.tracker_radius) &&
                      norm(spec.tracker_start.position() - spec.target.initial.position()) > min_gap;
      if (ok) {
        pool.variants.push_back({std::make_shared<const WorldSpec>(spec), false});
        if (cfg.enable_flip)
          pool.variants.push_back({std::make_shared<const WorldSpec>(mirror_world(spec)), true});
        break;
      }
      if (++rejected >= 1000)
        throw PerturbationInfeasible("no collision-free tracker start after 1000 draws for variant " +
                                     std::to_string(i));
    }
  }
  return pool;
}

EnvironmentPool single_env_pool(const WorldSpec& spec) {
  EnvironmentPool pool;
  pool.variants.push_back({std::make_shared<const WorldSpec>(spec), false});
  return pool;
}

const EnvVariant& sample_episode_env(const EnvironmentPool& pool, std::mt19937_64& rng) {
  if (pool.empty()) throw InvalidWorld("cannot sample from an empty environment pool");
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  return pool.variants[pick(rng)];
}

WorldSpec randomize_appearance(const WorldSpec& spec, const AugmentConfig& cfg, int texture_count,
                               std::mt19937_64& rng) {
  if (texture_count <= 0) throw EmptyTexturePool("appearance randomisation needs textures");
  std::uniform_int_distribution<int> pick(0, texture_count - 1);
  WorldSpec out = spec;
  for (auto& w : out.walls) w.texture = pick(rng);
  out.floor_texture = pick(rng);
  out.ceiling_texture = pick(rng);
  out.target.appearance = pick(rng);
  for (auto& d : out.distractors) d.appearance = pick(rng);
  out.light.intensity = draw(cfg.light_intensity, rng);
  for (int c = 0; c < 3; ++c) out.light.tint[c] = draw(cfg.tint[c], rng);
  return out;
}

WorldSpec randomize_trajectory(const WorldSpec& spec, const AugmentConfig& cfg,
                               std::mt19937_64& rng) {
  const PlannerOptions planner;
  const double clearance = spec.target.radius + 0.05;
  std::vector<Vec2> free_cells;
  const int nx = static_cast<int>(std::floor(spec.bounds.width() / planner.cell_size));
  const int ny = static_cast<int>(std::floor(spec.bounds.height() / planner.cell_size));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 c{spec.bounds.min.x + (i + 0.5) * planner.cell_size,
                   spec.bounds.min.y + (j + 0.5) * planner.cell_size};
      if (is_free(spec, c, clearance)) free_cells.push_back(c);
    }
  }
  if (free_cells.empty()) throw NoPath("map has no free cells for goals");
  std::uniform_int_distribution<size_t> pick(0, free_cells.size() - 1);

  const Vec2 start = spec.target.initial.position();
  std::vector<Vec2> waypoints{start};
  Vec2 from = start;
  for (int g = 0; g < cfg.goals_per_episode; ++g) {
    // Prefer goals at least one unit away so every leg actually moves.
    Vec2 goal = free_cells[pick(rng)];
    for (int tries = 0; tries < 16 && norm(goal - from) < 1.0; ++tries) goal = free_cells[pick(rng)];
    const auto leg = plan_path(spec, from, goal, planner);
    waypoints.insert(waypoints.end(), leg.begin() + 1, leg.end());
    from = goal;
  }

  WorldSpec out = spec;
  auto& traj = out.target.trajectory;
  traj.waypoints = std::move(waypoints);
  traj.loop = false;
  traj.speed = draw(cfg.speed, rng);
  traj.zigzag_amplitude = draw(cfg.zigzag_amplitude, rng);
  traj.zigzag_period =
      std::uniform_int_distribution<int>(cfg.zigzag_period[0], cfg.zigzag_period[1])(rng);
  if (traj.waypoints.size() > 1) {
    const Vec2 d = traj.waypoints[1] - traj.waypoints[0];
    if (norm(d) > 0.0) out.target.initial.heading = normalize_angle(std::atan2(d.y, d.x));
  }
  return out;
}

WorldSpec randomize_background(const WorldSpec& spec, const AugmentConfig& cfg,
                               std::mt19937_64& rng) {
  WorldSpec out = spec;
  std::bernoulli_distribution hide(cfg.hide_background_probability);
  for (auto& obj : out.background_objects) obj.visible = !hide(rng);
  return out;
}

Pose next_start(const EpisodeLog* previous, const WorldSpec& spec, const AugmentConfig& cfg) {
  if (!cfg.resume_from_failure || previous == nullptr || previous->reached_max_steps())
    return spec.tracker_start;
  return previous->final_tracker_pose().value_or(spec.tracker_start);
}

EpisodePlan plan_episode(const EnvironmentPool& pool, const AugmentConfig& cfg, int texture_count,
                         std::mt19937_64& rng, const EpisodeLog* previous) {
  EpisodePlan plan{sample_episode_env(pool, rng), std::nullopt};
  const bool edit = cfg.randomize_appearance || cfg.resample_goals ||
                    cfg.hide_background_probability > 0.0;
  if (edit) {
    WorldSpec spec = *plan.variant.spec;
    if (cfg.randomize_appearance) spec = randomize_appearance(spec, cfg, texture_count, rng);
    if (cfg.resample_goals) spec = randomize_trajectory(spec, cfg, rng);
    if (cfg.hide_background_probability > 0.0) spec = randomize_background(spec, cfg, rng);
    plan.variant.spec = std::make_shared<const WorldSpec>(std::move(spec));
  }
  // Logs hold physical poses, which is what the env's start override expects.
  if (cfg.resume_from_failure && previous && !previous->reached_max_steps())
    plan.tracker_start = previous->final_tracker_pose();
  return plan;
}

}  // namespace activetrack
