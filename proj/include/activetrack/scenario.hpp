#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "activetrack/world.hpp"

namespace activetrack {

enum class PathShape { kTraining, kStandard, kSharpTurn, kCounterclockwise };

/// One knob per test family: path shape, target look, background set and an
/// optional static look-alike distractor at a lateral offset from the path.
struct ScenarioKnobs {
  PathShape path = PathShape::kTraining;
  int target_appearance = 6;  // tex::kMonster
  bool background_swap = false;
  std::optional<double> distractor_offset;
};

struct Scenario {
  std::string name;
  ScenarioKnobs knobs;
  WorldSpec spec;
};

/// training, standard, sharp_turn, counterclockwise, appearance_swap,
/// background_swap, distractor_near, distractor_far.
const std::vector<std::string>& scenario_names();

/// Throws ConfigError for unknown names.
Scenario make_scenario(std::string_view name);
WorldSpec build_world(const ScenarioKnobs& knobs);

}  // namespace activetrack
