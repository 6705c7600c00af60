#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "activetrack/geometry.hpp"

namespace activetrack {

inline constexpr int kMapVersion = 1;

struct Rect {
  Vec2 min;
  Vec2 max;

  bool contains(Vec2 p, double margin = 0.0) const {
    return p.x >= min.x + margin && p.x <= max.x - margin && p.y >= min.y + margin &&
           p.y <= max.y - margin;
  }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Wall {
  Segment segment;
  int texture = 0;
  friend bool operator==(const Wall&, const Wall&) = default;
};

struct Light {
  double intensity = 1.0;  // ambient, in [0, 1]
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  friend bool operator==(const Light&, const Light&) = default;
};

/// Scripted path. Speed is in world units per step; the zig-zag is a signed
/// lateral offset (positive = left of travel) with a period in steps.
struct TrajectoryScript {
  std::vector<Vec2> waypoints;
  double speed = 0.0;
  double zigzag_amplitude = 0.0;
  int zigzag_period = 0;
  bool loop = false;
  friend bool operator==(const TrajectoryScript&, const TrajectoryScript&) = default;
};

struct TargetSpec {
  Pose initial;
  TrajectoryScript trajectory;
  int appearance = 0;
  bool appearance_mirrored = false;
  double radius = 0.3;
  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

struct Distractor {
  Pose initial;
  TrajectoryScript trajectory;  // ignored when is_static
  int appearance = 0;
  bool appearance_mirrored = false;
  bool is_static = true;
  double radius = 0.3;
  friend bool operator==(const Distractor&, const Distractor&) = default;
};

/// A group of wall segments that can be hidden from the camera.
struct BackgroundObject {
  std::vector<int> walls;
  bool visible = true;
  friend bool operator==(const BackgroundObject&, const BackgroundObject&) = default;
};

struct WorldSpec {
  int map_version = kMapVersion;
  Rect bounds;
  std::vector<Wall> walls;
  int floor_texture = 0;
  int ceiling_texture = 0;
  Light light;
  Pose tracker_start;
  double tracker_radius = 0.2;
  TargetSpec target;
  std::vector<Distractor> distractors;
  std::vector<BackgroundObject> background_objects;

  std::vector<Segment> wall_segments() const;
  /// Visibility per wall after applying background-object flags.
  std::vector<bool> wall_visibility() const;
  friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

struct WorldState {
  Pose tracker;
  Pose target;
  double target_progress = 0.0;  // arc length along the target trajectory
  std::vector<Pose> distractors;
  std::vector<double> distractor_progress;
  std::int64_t step_count = 0;
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Target pose in the tracker-centric frame S.
struct RelativePose {
  double x = 0.0;      // rightward
  double y = 0.0;      // forward
  double omega = 0.0;  // target heading minus tracker heading, in (-pi, pi]
  friend bool operator==(const RelativePose&, const RelativePose&) = default;
};

/// Per-step tracker motion in world units and radians.
struct TrackerMotion {
  double linear = 0.0;
  double angular = 0.0;
};

RelativePose relative_pose(const Pose& tracker, const Pose& target);

/// Throws InvalidWorld if the spec breaks its invariants. Texture ids are
/// checked only when `texture_count` is positive.
void validate(const WorldSpec& spec, int texture_count = 0);

/// Minimum distance from `p` to any wall segment of the spec.
double wall_clearance(const WorldSpec& spec, Vec2 p);

/// True when a disc of `radius` at `p` is inside bounds and clear of walls.
bool is_free(const WorldSpec& spec, Vec2 p, double radius);

WorldState initial_state(const WorldSpec& spec);

/// Turns by `motion.angular`, then moves `motion.linear` along the new
/// heading. Motion stops at first contact with a wall or the bounds.
void step_tracker(const WorldSpec& spec, WorldState& state, TrackerMotion motion);

/// Advances the target (and any moving distractors) one step along their
/// scripts. Does not touch step_count.
void step_target(const WorldSpec& spec, WorldState& state);

/// Position on a trajectory at arc length `s`, with the unit travel
/// direction there.
struct PathPoint {
  Vec2 position;
  Vec2 direction;
};
PathPoint trajectory_point(const TrajectoryScript& traj, double s);
double trajectory_length(const TrajectoryScript& traj);

/// Lateral zig-zag offset (signed, leftward) at a given step.
double zigzag_offset(const TrajectoryScript& traj, std::int64_t step);

struct PlannerOptions {
  double cell_size = 0.25;
  double clearance = -1.0;  // < 0: use the target footprint radius
};

/// 8-connected A* over an occupancy grid followed by string pulling.
/// Throws NoPath when the goal is unreachable.
std::vector<Vec2> plan_path(const WorldSpec& spec, Vec2 start, Vec2 goal,
                            const PlannerOptions& options = {});

/// True when every point of segment (a,b) keeps at least `clearance` from
/// all walls.
bool segment_clear(const WorldSpec& spec, Vec2 a, Vec2 b, double clearance);

/// Reflects the world across the x axis (y -> -y). Built-in maps put the
/// tracker start on that axis facing +x, so this is the mirror across the
/// tracker's forward line. Exact involution in floating point.
WorldSpec mirror_world(const WorldSpec& spec);
Pose mirror_pose(const Pose& p);

/// Structured text map file (JSON) with a `map_version` field.
std::string world_to_json(const WorldSpec& spec);
WorldSpec world_from_json(const std::string& text);
void save_world(const WorldSpec& spec, const std::string& path);
WorldSpec load_world(const std::string& path);

}  // namespace activetrack
