#include "activetrack/actionmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "activetrack/errors.hpp"

namespace activetrack {

std::string_view to_string(ActionSpace space) {
  switch (space) {
    case ActionSpace::kDiscrete6: return "discrete6";
    case ActionSpace::kDiscrete9: return "discrete9";
    case ActionSpace::kContinuous2: return "continuous2";
  }
  return "unknown";
}

ActionSpace action_space_from_string(std::string_view name) {
  if (name == "discrete6") return ActionSpace::kDiscrete6;
  if (name == "discrete9") return ActionSpace::kDiscrete9;
  if (name == "continuous2") return ActionSpace::kContinuous2;
  throw OutOfSpace("unknown action space '" + std::string(name) + "'");
}

int action_count(ActionSpace space) {
  switch (space) {
    case ActionSpace::kDiscrete6: return 6;
    case ActionSpace::kDiscrete9: return 9;
    case ActionSpace::kContinuous2: return 0;
  }
  return 0;
}

const std::array<ActionTableRow, 9>& discrete9_table() {
  static const std::array<ActionTableRow, 9> table{{
      {"Forward (fast)", {50, 0}, {0.4, 0}},
      {"Forward (slow)", {25, 0}, {0.2, 0}},
      {"Backward (fast)", {-50, 0}, {-0.4, 0}},
      {"Backward (slow)", {-25, 0}, {-0.2, 0}},
      {"Turn Left", {0, 10}, {0, 0.6}},
      {"Turn Right", {0, -10}, {0, -0.6}},
      {"Turn Left & Forward", {15, 5}, {0.1, 0.2}},
      {"Turn Right & Forward", {15, -5}, {0.1, -0.2}},
      {"Stop", {0, 0}, {0, 0}},
  }};
  return table;
}

int discrete6_row(int index) {
  static constexpr std::array<int, 6> rows{d9::kForwardSlow,       d9::kTurnLeft,
                                           d9::kTurnRight,         d9::kTurnLeftForward,
                                           d9::kTurnRightForward, d9::kStop};
  if (index < 0 || index >= 6) throw OutOfSpace("discrete6 index out of range");
  return rows[index];
}

std::string_view action_name(const Action& action) {
  static constexpr std::array<std::string_view, 6> names6{
      "move-forward", "turn-left", "turn-right", "turn-left-and-move-forward",
      "turn-right-and-move-forward", "no-op"};
  check_action(action);
  switch (action.space) {
    case ActionSpace::kDiscrete6: return names6[action.index];
    case ActionSpace::kDiscrete9: return discrete9_table()[action.index].name;
    case ActionSpace::kContinuous2: return "continuous";
  }
  return "unknown";
}

void check_action(const Action& action) {
  if (action.is_discrete()) {
    if (action.index < 0 || action.index >= action_count(action.space))
      throw OutOfSpace("discrete index " + std::to_string(action.index) + " outside " +
                       std::string(to_string(action.space)));
  } else if (!std::isfinite(action.linear) || !std::isfinite(action.angular)) {
    throw OutOfSpace("continuous action must be finite");
  }
}

namespace {

const ActionTableRow& row_for(const Action& a) {
  const int row = a.space == ActionSpace::kDiscrete6 ? discrete6_row(a.index) : a.index;
  return discrete9_table()[row];
}

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

VirtualVelocity to_virtual(const Action& action) {
  check_action(action);
  if (action.is_discrete()) return row_for(action).virt;
  return {clip_unit(action.linear) * kVirtualHigh.linear,
          clip_unit(action.angular) * kVirtualHigh.angular};
}

RealVelocity to_real(const Action& action) {
  check_action(action);
  if (action.is_discrete()) return row_for(action).real;
  return {clip_unit(action.linear) * kRealHigh.linear,
          clip_unit(action.angular) * kRealHigh.angular};
}

Action flip_action(const Action& action) {
  Action out = action;
  switch (action.space) {
    case ActionSpace::kDiscrete6:
      if (action.index == d6::kTurnLeft) out.index = d6::kTurnRight;
      else if (action.index == d6::kTurnRight) out.index = d6::kTurnLeft;
      else if (action.index == d6::kTurnLeftForward) out.index = d6::kTurnRightForward;
      else if (action.index == d6::kTurnRightForward) out.index = d6::kTurnLeftForward;
      break;
    case ActionSpace::kDiscrete9:
      if (action.index == d9::kTurnLeft) out.index = d9::kTurnRight;
      else if (action.index == d9::kTurnRight) out.index = d9::kTurnLeft;
      else if (action.index == d9::kTurnLeftForward) out.index = d9::kTurnRightForward;
      else if (action.index == d9::kTurnRightForward) out.index = d9::kTurnLeftForward;
      break;
    case ActionSpace::kContinuous2:
      out.angular = -action.angular;
      break;
  }
  return out;
}

TrackerMotion to_motion(const Action& action, const MotionScale& scale) {
  const VirtualVelocity v = to_virtual(action);
  return {v.linear * scale.world_units_per_cm, v.angular * scale.radians_per_angular_unit};
}

std::vector<VelocityCommand> command_stream(const std::vector<Action>& actions, int rate_hz) {
  if (rate_hz <= 0 || 1000 % rate_hz != 0)
    throw OutOfSpace("command rate must divide 1000 ms evenly");
  const long long period = 1000 / rate_hz;
  std::vector<VelocityCommand> out;
  out.reserve(actions.size());
  for (size_t i = 0; i < actions.size(); ++i)
    out.push_back({static_cast<long long>(i) * period, to_real(actions[i])});
  return out;
}

void write_command_stream(std::ostream& out, const std::vector<VelocityCommand>& commands,
                          int rate_hz) {
  out << "# activetrack-commands v1 rate_hz=" << rate_hz << '\n';
  out << "timestamp_ms,linear_mps,angular_radps\n";
  char line[96];
  for (const auto& c : commands) {
    // +0.0 avoids printing "-0.000000" for flipped zero velocities.
    std::snprintf(line, sizeof line, "%lld,%.6f,%.6f\n", c.timestamp_ms, c.velocity.linear + 0.0,
                  c.velocity.angular + 0.0);
    out << line;
  }
}

}  // namespace activetrack
