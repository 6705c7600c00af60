// Independent reference implementations used by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "activetrack/env.hpp"
#include "activetrack/net.hpp"
#include "activetrack/world.hpp"

namespace oracle {

using namespace activetrack;

// Target position in the tracker frame via an explicit rotation matrix.
inline RelativePose relative_pose_by_matrix(const Pose& tracker, const Pose& target) {
  const double th = tracker.heading;
  // World-to-body rotation; body axes are forward (fx, fy) and right (fy, -fx).
  const double R[2][2] = {{std::sin(th), -std::cos(th)}, {std::cos(th), std::sin(th)}};
  const double dx = target.x - tracker.x, dy = target.y - tracker.y;
  RelativePose r;
  r.x = R[0][0] * dx + R[0][1] * dy;
  r.y = R[1][0] * dx + R[1][1] * dy;
  double w = target.heading - tracker.heading;
  while (w > std::numbers::pi) w -= 2 * std::numbers::pi;
  while (w <= -std::numbers::pi) w += 2 * std::numbers::pi;
  r.omega = w;
  return r;
}

// Discounted sum computed forward for each start index, no recursion.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma,
                                              double bootstrap) {
  const size_t n = rewards.size();
  std::vector<double> out(n);
  for (size_t k = 0; k < n; ++k) {
    double sum = 0.0, disc = 1.0;
    for (size_t j = k; j < n; ++j) {
      sum += disc * rewards[j];
      disc *= gamma;
    }
    out[k] = sum + disc * bootstrap;
  }
  return out;
}

struct FdBlockResult {
  std::string name;
  size_t entries = 0;
  size_t failures = 0;
  double worst_rel = 0.0;
};

// Small network whose geometry fits a 12x12 input.
inline NetConfig tiny_config(ActionSpace space) {
  NetConfig c;
  c.in_width = 12;
  c.in_height = 12;
  c.in_channels = 3;
  c.conv1 = {3, 4, 2};  // 5x5
  c.conv2 = {4, 3, 2};  // 2x2
  c.fc = 8;
  c.lstm = 6;
  c.action_space = space;
  return c;
}

inline std::vector<RolloutStep> random_rollout(const NetConfig& c, int steps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, std::max(0, action_count(c.action_space) - 1));
  std::vector<RolloutStep> out(steps);
  for (auto& s : out) {
    s.rgb.resize(static_cast<size_t>(c.in_width) * c.in_height * c.in_channels);
    for (auto& v : s.rgb) v = static_cast<float>(u(rng));
    if (c.action_space == ActionSpace::kContinuous2)
      s.action = Action::continuous(2 * u(rng) - 1, 2 * u(rng) - 1);
    else
      s.action = Action::discrete(c.action_space, pick(rng));
    s.target.advantage = 2 * u(rng) - 1;
    s.target.entropy_weight = 0.01 + 0.3 * u(rng);
    s.target.value_target = 2 * u(rng) - 1;
    s.target.value_weight = 1.0;
  }
  return out;
}

// Randomises all parameters (including biases) so that no unit sits exactly
// on a ReLU kink and every block carries gradient.
inline NetworkParams random_params(const NetConfig& c, std::mt19937_64& rng, double scale = 0.5) {
  NetworkParams p(c);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : p.data()) v = u(rng);
  return p;
}

// Central differences against the analytic gradient for every entry.
inline std::vector<FdBlockResult> finite_difference_check(const NetworkParams& params,
                                                          const std::vector<RolloutStep>& rollout,
                                                          const RecurrentState& rec, double eps,
                                                          double tol) {
  const NetworkParams grad = backward(params, rollout, rec);
  NetworkParams probe = params;
  std::vector<FdBlockResult> out;
  for (const auto& b : params.blocks()) {
    FdBlockResult r{b.name, b.size, 0, 0.0};
    for (size_t i = 0; i < b.size; ++i) {
      const size_t idx = b.offset + i;
      const double orig = probe.data()[idx];
      probe.data()[idx] = orig + eps;
      const double lp = rollout_loss(probe, rollout, rec).total;
      probe.data()[idx] = orig - eps;
      const double lm = rollout_loss(probe, rollout, rec).total;
      probe.data()[idx] = orig;
      const double numeric = (lp - lm) / (2 * eps);
      const double analytic = grad.data()[idx];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      r.worst_rel = std::max(r.worst_rel, rel);
      if (rel > tol) ++r.failures;
    }
    out.push_back(r);
  }
  return out;
}

// Log whose step k (1-based) has the target in view iff visible[k - 1].
inline EpisodeLog synthetic_log(const std::vector<bool>& visible, bool reached_max) {
  EpisodeLog log;
  log.max_steps = static_cast<int>(visible.size());
  for (size_t k = 0; k < visible.size(); ++k) {
    StepRecord r;
    r.step = static_cast<std::int64_t>(k) + 1;
    if (visible[k]) r.bbox = BoundingBox{10, 10, 2, 2, 0.01};
    log.steps.push_back(r);
  }
  log.summary.episode_length = static_cast<std::int64_t>(visible.size());
  log.summary.done_reason = reached_max ? DoneReason::kMaxSteps : DoneReason::kThreshold;
  return log;
}

// Reacquisition latencies by walking the steps one at a time.
inline std::vector<std::int64_t> naive_latencies(const std::vector<EpisodeLog>& logs, int window) {
  std::vector<std::int64_t> out;
  for (const auto& log : logs) {
    std::int64_t run = 0;
    for (const auto& s : log.steps) {
      if (!s.bbox) {
        ++run;
      } else {
        if (run > 0 && run < window) out.push_back(run);
        run = 0;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
