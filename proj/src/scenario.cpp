#include "activetrack/scenario.hpp"

#include "activetrack/errors.hpp"
#include "activetrack/texture.hpp"

namespace activetrack {

namespace {

// All maps share an 18 x 18 room; the tracker starts at the origin facing
// +x with the target two units ahead.
constexpr Rect kBounds{{-3.0, -9.0}, {15.0, 9.0}};
constexpr double kPillarHalf = 0.3;

std::vector<Vec2> path_points(PathShape p) {
  switch (p) {
    case PathShape::kTraining:
      return {{2, 0}, {7, 0}, {9, -2}, {9, -4}, {7, -6}, {2, -6}, {0, -4}, {0, -2}};
    case PathShape::kStandard:
      return {{2, 0}, {9, 0}, {11, -2}, {11, -5}, {9, -7}, {2, -7}, {0, -5}, {0, -2}};
    case PathShape::kSharpTurn:
      return {{2, 0}, {10, 0}, {4, -3}, {10, -6}, {1, -6}, {1, -3}};
    case PathShape::kCounterclockwise:
      return {{2, 0}, {8, 0}, {10, 2}, {10, 5.5}, {8, 7.5}, {1, 7.5}, {-1, 5.5}, {-1, 2}};
  }
  return {};
}

// Pillars sit at least a unit away from the path they accompany.
std::vector<Vec2> pillar_centers(PathShape p) {
  switch (p) {
    case PathShape::kTraining:
      return {{4.5, -3.0}, {12.5, -7.5}, {12.5, 6.0}, {-1.5, 6.0}};
    case PathShape::kStandard:
      return {{5.5, -3.5}, {13.5, -8.0}, {12.5, 6.0}, {-1.5, 6.0}};
    case PathShape::kSharpTurn:
      return {{13.0, -3.0}, {-1.5, -7.5}, {6.0, 4.0}, {-1.5, 4.0}};
    case PathShape::kCounterclockwise:
      return {{4.5, 3.75}, {12.0, -6.0}, {-1.5, -6.0}, {13.5, 8.0}};
  }
  return {};
}

void add_pillar(WorldSpec& spec, Vec2 c, int texture) {
  const double h = kPillarHalf;
  const Vec2 corners[4] = {{c.x - h, c.y - h}, {c.x + h, c.y - h}, {c.x + h, c.y + h}, {c.x - h, c.y + h}};
  BackgroundObject obj;
  for (int i = 0; i < 4; ++i) {
    obj.walls.push_back(static_cast<int>(spec.walls.size()));
    spec.walls.push_back({{corners[i], corners[(i + 1) % 4]}, texture});
  }
  spec.background_objects.push_back(obj);
}

}  // namespace

WorldSpec build_world(const ScenarioKnobs& k) {
  WorldSpec spec;
  spec.bounds = kBounds;
  const int wall_tex = k.background_swap ? tex::kStone : tex::kBrick;
  const Vec2 a = kBounds.min, b = kBounds.max;
  spec.walls = {{{{a.x, a.y}, {b.x, a.y}}, wall_tex},
                {{{b.x, a.y}, {b.x, b.y}}, wall_tex},
                {{{b.x, b.y}, {a.x, b.y}}, wall_tex},
                {{{a.x, b.y}, {a.x, a.y}}, wall_tex}};
  spec.floor_texture = k.background_swap ? tex::kFloorAlt : tex::kFloor;
  spec.ceiling_texture = k.background_swap ? tex::kCeilingAlt : tex::kCeiling;
  const int pillar_tex = k.background_swap ? tex::kChecker : tex::kWood;
  for (Vec2 c : pillar_centers(k.path)) add_pillar(spec, c, pillar_tex);

  spec.tracker_start = {0.0, 0.0, 0.0};
  spec.target.initial = {2.0, 0.0, 0.0};
  spec.target.appearance = k.target_appearance;
  auto& traj = spec.target.trajectory;
  traj.waypoints = path_points(k.path);
  traj.speed = 0.08;
  traj.zigzag_amplitude = 0.3;
  traj.zigzag_period = 40;
  traj.loop = true;

  if (k.distractor_offset) {
    // Beside the first straight stretch, on the left of travel.
    Distractor d;
    d.initial = {6.0, *k.distractor_offset, 0.0};
    d.appearance = k.target_appearance;
    d.is_static = true;
    spec.distractors.push_back(d);
  }
  validate(spec);
  return spec;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{
      "training",        "standard",        "sharp_turn",      "counterclockwise",
      "appearance_swap", "background_swap", "distractor_near", "distractor_far"};
  return names;
}

Scenario make_scenario(std::string_view name) {
  ScenarioKnobs k;
  if (name == "training") {
  } else if (name == "standard") {
    k.path = PathShape::kStandard;
  } else if (name == "sharp_turn") {
    k.path = PathShape::kSharpTurn;
  } else if (name == "counterclockwise") {
    k.path = PathShape::kCounterclockwise;
  } else if (name == "appearance_swap") {
    k.path = PathShape::kStandard;
    k.target_appearance = tex::kCacodemon;
  } else if (name == "background_swap") {
    k.path = PathShape::kStandard;
    k.background_swap = true;
  } else if (name == "distractor_near") {
    k.path = PathShape::kStandard;
    k.distractor_offset = 0.7;
  } else if (name == "distractor_far") {
    k.path = PathShape::kStandard;
    k.distractor_offset = 1.5;
  } else {
    std::string known;
    for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + std::string(name) + "' (known: " + known + ")");
  }
  return {std::string(name), k, build_world(k)};
}

}  // namespace activetrack
