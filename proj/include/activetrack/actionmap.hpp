#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "activetrack/world.hpp"

namespace activetrack {

enum class ActionSpace { kDiscrete6, kDiscrete9, kContinuous2 };

std::string_view to_string(ActionSpace space);
ActionSpace action_space_from_string(std::string_view name);

/// Number of discrete actions, or 0 for the continuous space.
int action_count(ActionSpace space);

/// Original six-action set.
namespace d6 {
inline constexpr int kForward = 0;
inline constexpr int kTurnLeft = 1;
inline constexpr int kTurnRight = 2;
inline constexpr int kTurnLeftForward = 3;
inline constexpr int kTurnRightForward = 4;
inline constexpr int kNoOp = 5;
}  // namespace d6

/// Extended nine-action set, in robot-table order.
namespace d9 {
inline constexpr int kForwardFast = 0;
inline constexpr int kForwardSlow = 1;
inline constexpr int kBackwardFast = 2;
inline constexpr int kBackwardSlow = 3;
inline constexpr int kTurnLeft = 4;
inline constexpr int kTurnRight = 5;
inline constexpr int kTurnLeftForward = 6;
inline constexpr int kTurnRightForward = 7;
inline constexpr int kStop = 8;
}  // namespace d9

/// A discrete index tagged with its space, or a continuous (linear, angular)
/// pair normalised so that +/-1 are the high/low bounds.
struct Action {
  ActionSpace space = ActionSpace::kDiscrete6;
  int index = 0;
  double linear = 0.0;
  double angular = 0.0;

  static Action discrete(ActionSpace space, int index) { return {space, index, 0.0, 0.0}; }
  static Action continuous(double linear, double angular) {
    return {ActionSpace::kContinuous2, 0, linear, angular};
  }
  bool is_discrete() const { return space != ActionSpace::kContinuous2; }
  friend bool operator==(const Action&, const Action&) = default;
};

/// Simulator velocity: linear in cm/step, angular in the table's degree units.
struct VirtualVelocity {
  double linear = 0.0;
  double angular = 0.0;
  friend bool operator==(const VirtualVelocity&, const VirtualVelocity&) = default;
};

/// Robot velocity: linear in m/s, angular in rad/s.
struct RealVelocity {
  double linear = 0.0;
  double angular = 0.0;
  friend bool operator==(const RealVelocity&, const RealVelocity&) = default;
};

struct ActionTableRow {
  std::string_view name;
  VirtualVelocity virt;
  RealVelocity real;
};

/// Rows of the nine-action table, indexed by d9 constants.
const std::array<ActionTableRow, 9>& discrete9_table();

/// Continuous bounds: high and low rows.
inline constexpr VirtualVelocity kVirtualHigh{80.0, 20.0};
inline constexpr VirtualVelocity kVirtualLow{-80.0, -20.0};
inline constexpr RealVelocity kRealHigh{0.4, 0.6};
inline constexpr RealVelocity kRealLow{-0.4, -0.6};

/// Row of the nine-action table a six-action index shares velocities with.
int discrete6_row(int index);
std::string_view action_name(const Action& action);

/// Throws OutOfSpace for indices outside the space or non-finite values.
void check_action(const Action& action);

VirtualVelocity to_virtual(const Action& action);
RealVelocity to_real(const Action& action);

/// Swaps left and right; leaves forward/backward/stop unchanged.
Action flip_action(const Action& action);

/// Conversion from table units to per-step simulator motion.
struct MotionScale {
  double world_units_per_cm = 0.01;
  double radians_per_angular_unit = std::numbers::pi / 180.0;
};

TrackerMotion to_motion(const Action& action, const MotionScale& scale);

/// Robot command stream at a fixed control rate.
inline constexpr int kCommandRateHz = 20;

struct VelocityCommand {
  long long timestamp_ms = 0;
  RealVelocity velocity;
};

std::vector<VelocityCommand> command_stream(const std::vector<Action>& actions,
                                            int rate_hz = kCommandRateHz);

/// Text format:
///   line 1: `# activetrack-commands v1 rate_hz=<rate>`
///   line 2: `timestamp_ms,linear_mps,angular_radps`
///   then one `%lld,%.6f,%.6f` line per command, LF-terminated.
void write_command_stream(std::ostream& out, const std::vector<VelocityCommand>& commands,
                          int rate_hz = kCommandRateHz);

}  // namespace activetrack
