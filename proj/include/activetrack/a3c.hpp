#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "activetrack/augment.hpp"
#include "activetrack/evalkit.hpp"
#include "activetrack/net.hpp"

namespace activetrack {

struct TrainConfig {
  double learning_rate = 1e-4;
  bool anneal_learning_rate = false;  // linear decay to zero at max_global_steps
  double entropy_weight = 0.01;
  double gamma = 0.99;
  int n_step = 20;
  int worker_count = 1;
  std::int64_t max_global_steps = 2'000'000;
  std::int64_t validation_interval = 50'000;
  int validation_episodes = 4;
  std::uint64_t seed = 0;
  double value_weight = 1.0;  // multiplies the 1/2 (R - V)^2 term
  double reward_scale = 1.0;  // applied to rewards before returns; logged AR is unscaled
  double grad_clip = 0.0;     // global-norm clip; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int log_interval = 50;  // updates between loss records in the training log

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct RolloutBatch {
  std::vector<double> rewards;
  std::vector<double> values;
  double bootstrap = 0.0;
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// R_k = r_k + gamma * R_{k+1} with R_n = bootstrap; A_k = R_k - V_k.
RolloutBatch compute_returns_advantages(const std::vector<double>& rewards,
                                        const std::vector<double>& values, double gamma,
                                        double bootstrap);

/// Loss of a batch under the given policy outputs, advantages held fixed.
/// Throws NonFiniteLoss.
LossBreakdown batch_loss(const RolloutBatch& batch, const std::vector<PolicyOutput>& outputs,
                         const std::vector<Action>& actions, double entropy_weight,
                         double value_weight = 1.0);

/// Per-step loss weights for the network's backward pass.
std::vector<StepTarget> step_targets(const RolloutBatch& batch, double entropy_weight,
                                     double value_weight = 1.0);

/// Authoritative parameters plus shared Adam moments. Reads and writes go
/// through relaxed atomic references, so concurrent workers may interleave
/// element-wise without locks.
class SharedParams {
 public:
  explicit SharedParams(NetworkParams initial);

  NetworkParams snapshot() const;
  /// Adam step with the shared moments. Returns the gradient norm after
  /// clipping.
  double apply(const NetworkParams& grad, const TrainConfig& cfg);

  std::int64_t advance_steps(std::int64_t n) { return global_step_.fetch_add(n) + n; }
  /// Reserves one environment step and returns the new count, or 0 once
  /// `limit` has been reached.
  std::int64_t claim_step(std::int64_t limit) {
    std::int64_t cur = global_step_.load();
    while (cur < limit)
      if (global_step_.compare_exchange_weak(cur, cur + 1)) return cur + 1;
    return 0;
  }
  std::int64_t global_step() const { return global_step_.load(); }
  std::int64_t updates() const { return updates_.load(); }
  const NetConfig& config() const { return params_.config(); }

 private:
  NetworkParams params_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::atomic<std::int64_t> global_step_{0};
  std::atomic<std::int64_t> updates_{0};
};

/// Runs the network on agent-view frames; greedy or sampled actions.
class NetworkAgent : public Agent {
 public:
  NetworkAgent(NetworkParams params, bool greedy) : params_(std::move(params)), greedy_(greedy) {}
  void begin_episode(const Observation& first, std::uint64_t episode_seed) override;
  Action act(const Observation& obs) override;
  const RecurrentState& recurrent() const { return rec_; }
  const NetworkParams& params() const { return params_; }

 private:
  NetworkParams params_;
  bool greedy_;
  RecurrentState rec_;
  std::mt19937_64 rng_;
};

struct ValidationResult {
  std::int64_t global_step = 0;
  double mean_ar = 0.0;
  double mean_el = 0.0;
};

/// Greedy evaluation on a snapshot; never writes to `shared`.
ValidationResult validate(const SharedParams& shared, const EnvSetup& setup,
                          const EnvironmentPool& validation_pool, int episodes,
                          std::uint64_t seed);

struct TrainingData {
  EnvSetup env;
  std::shared_ptr<const EnvironmentPool> pool;
  AugmentConfig augment;
  std::shared_ptr<const EnvironmentPool> validation_pool;  // null: use `pool`
};

struct TrainResult {
  NetworkParams final_params;
  NetworkParams best_params;
  double best_validation_ar = -1e300;
  std::int64_t global_steps = 0;
  std::int64_t updates = 0;
  std::int64_t episodes = 0;
  std::vector<ValidationResult> validations;
  double seconds = 0.0;
};

/// Runs A3C to max_global_steps. Writes JSONL records to `log` when given
/// and the best checkpoint to `best_checkpoint_path` when non-empty. A
/// worker exception stops all workers and is rethrown.
TrainResult train(const NetConfig& net, const TrainConfig& cfg, const TrainingData& data,
                  std::ostream* log = nullptr, const std::string& best_checkpoint_path = "",
                  std::function<void(const std::string&)> progress = {});

}  // namespace activetrack
