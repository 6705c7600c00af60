#include <doctest.h>

#include <sstream>

#include "activetrack/actionmap.hpp"
#include "activetrack/errors.hpp"
#include "fixtures.hpp"

using namespace activetrack;

TEST_CASE("tables match the golden fixture row by row") {
  const auto rows = fixture::action_tables();
  REQUIRE(rows.size() == 11);
  for (int i = 0; i < 9; ++i) {
    const auto& r = rows[i];
    CAPTURE(r.name);
    const Action a = Action::discrete(ActionSpace::kDiscrete9, i);
    CHECK(action_name(a) == r.name);
    CHECK(to_virtual(a) == VirtualVelocity{r.virt_linear, r.virt_angular});
    CHECK(to_real(a) == RealVelocity{r.real_linear, r.real_angular});
  }
  CHECK(to_virtual(Action::continuous(1, 1)) == VirtualVelocity{rows[9].virt_linear, rows[9].virt_angular});
  CHECK(to_real(Action::continuous(1, 1)) == RealVelocity{rows[9].real_linear, rows[9].real_angular});
  CHECK(to_virtual(Action::continuous(-1, -1)) == VirtualVelocity{rows[10].virt_linear, rows[10].virt_angular});
  CHECK(to_real(Action::continuous(-1, -1)) == RealVelocity{rows[10].real_linear, rows[10].real_angular});
}

TEST_CASE("named examples") {
  CHECK(to_virtual(Action::discrete(ActionSpace::kDiscrete9, d9::kForwardFast)) == VirtualVelocity{50, 0});
  CHECK(to_virtual(Action::discrete(ActionSpace::kDiscrete9, d9::kTurnLeftForward)) == VirtualVelocity{15, 5});
  CHECK(to_virtual(Action::discrete(ActionSpace::kDiscrete9, d9::kStop)) == VirtualVelocity{0, 0});
  CHECK(to_real(Action::discrete(ActionSpace::kDiscrete9, d9::kTurnRight)) == RealVelocity{0, -0.6});
  CHECK(to_real(Action::discrete(ActionSpace::kDiscrete9, d9::kBackwardSlow)) == RealVelocity{-0.2, 0});
  const RealVelocity r = to_real(Action::continuous(0.9, 0));
  CHECK(r.linear == doctest::Approx(0.36));
  CHECK(r.angular == 0.0);
  CHECK(to_real(Action::continuous(3.0, 7.0)) == RealVelocity{0.4, 0.6});
  CHECK_THROWS_AS(to_real(Action::discrete(ActionSpace::kDiscrete6, 6)), OutOfSpace);
  CHECK_THROWS_AS(to_virtual(Action::continuous(std::nan(""), 0)), OutOfSpace);
}

TEST_CASE("six-action set shares the nine-action velocities") {
  CHECK(to_virtual(Action::discrete(ActionSpace::kDiscrete6, d6::kForward)) ==
        to_virtual(Action::discrete(ActionSpace::kDiscrete9, d9::kForwardSlow)));
  CHECK(to_virtual(Action::discrete(ActionSpace::kDiscrete6, d6::kNoOp)) == VirtualVelocity{0, 0});
  CHECK(to_virtual(Action::discrete(ActionSpace::kDiscrete6, d6::kTurnLeft)) == VirtualVelocity{0, 10});
}

TEST_CASE("flip_action") {
  CHECK(flip_action(Action::discrete(ActionSpace::kDiscrete6, d6::kTurnLeft)).index == d6::kTurnRight);
  CHECK(flip_action(Action::continuous(0.3, 0.7)) == Action::continuous(0.3, -0.7));
  for (ActionSpace s : {ActionSpace::kDiscrete6, ActionSpace::kDiscrete9}) {
    for (int i = 0; i < action_count(s); ++i) {
      const Action a = Action::discrete(s, i);
      CHECK(flip_action(flip_action(a)) == a);
      const VirtualVelocity v = to_virtual(a), f = to_virtual(flip_action(a));
      CHECK(f.linear == v.linear);
      CHECK(f.angular == -v.angular);
    }
  }
}

TEST_CASE("command stream ticks every 50 ms") {
  std::vector<Action> actions;
  for (int i = 0; i < 9; ++i) actions.push_back(Action::discrete(ActionSpace::kDiscrete9, i));
  const auto cmds = command_stream(actions);
  REQUIRE(cmds.size() == 9);
  for (size_t i = 0; i < cmds.size(); ++i) {
    CHECK(cmds[i].timestamp_ms == static_cast<long long>(50 * i));
    CHECK(cmds[i].velocity == to_real(actions[i]));
  }
  std::stringstream ss;
  write_command_stream(ss, cmds);
  std::string header, columns, first;
  std::getline(ss, header);
  std::getline(ss, columns);
  std::getline(ss, first);
  CHECK(header == "# activetrack-commands v1 rate_hz=20");
  CHECK(columns == "timestamp_ms,linear_mps,angular_radps");
  CHECK(first == "0,0.400000,0.000000");
}
