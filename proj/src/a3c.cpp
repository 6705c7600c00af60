#include "activetrack/a3c.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "activetrack/errors.hpp"

namespace activetrack {

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(learning_rate > 0.0, "train.learning_rate must be > 0");
  need(entropy_weight >= 0.0, "train.entropy_weight must be >= 0");
  need(gamma > 0.0 && gamma <= 1.0, "train.gamma must be in (0, 1]");
  need(n_step >= 1, "train.n_step must be >= 1");
  need(worker_count >= 1, "train.worker_count must be >= 1");
  need(max_global_steps >= 1, "train.max_global_steps must be >= 1");
  need(validation_interval >= 1, "train.validation_interval must be >= 1");
  need(validation_episodes >= 1, "train.validation_episodes must be >= 1");
  need(value_weight >= 0.0, "train.value_weight must be >= 0");
  need(reward_scale > 0.0, "train.reward_scale must be > 0");
  need(grad_clip >= 0.0, "train.grad_clip must be >= 0");
  need(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
       "train.adam betas must be in [0, 1)");
  need(adam_eps > 0.0, "train.adam_eps must be > 0");
  need(log_interval >= 1, "train.log_interval must be >= 1");
}

RolloutBatch compute_returns_advantages(const std::vector<double>& rewards,
                                        const std::vector<double>& values, double gamma,
                                        double bootstrap) {
  if (rewards.empty()) throw ShapeMismatch("rollout must contain at least one reward");
  if (!values.empty() && values.size() != rewards.size())
    throw ShapeMismatch("rollout rewards and values differ in length");
  RolloutBatch b;
  b.rewards = rewards;
  b.values = values.empty() ? std::vector<double>(rewards.size(), 0.0) : values;
  b.bootstrap = bootstrap;
  const size_t n = rewards.size();
  b.returns.resize(n);
  b.advantages.resize(n);
  double R = bootstrap;
  for (size_t k = n; k-- > 0;) {
    R = rewards[k] + gamma * R;
    b.returns[k] = R;
    b.advantages[k] = R - b.values[k];
  }
  return b;
}

std::vector<StepTarget> step_targets(const RolloutBatch& batch, double entropy_weight,
                                     double value_weight) {
  std::vector<StepTarget> out(batch.returns.size());
  for (size_t k = 0; k < out.size(); ++k)
    out[k] = {batch.advantages[k], entropy_weight, batch.returns[k], value_weight};
  return out;
}

LossBreakdown batch_loss(const RolloutBatch& batch, const std::vector<PolicyOutput>& outputs,
                         const std::vector<Action>& actions, double entropy_weight,
                         double value_weight) {
  if (outputs.size() != batch.returns.size() || actions.size() != outputs.size())
    throw ShapeMismatch("batch, outputs and actions must align");
  LossBreakdown L;
  for (size_t k = 0; k < outputs.size(); ++k) {
    const double lp = log_prob(outputs[k], actions[k]);
    const double h = entropy(outputs[k]);
    const double err = batch.returns[k] - outputs[k].value;
    L.policy += -lp * batch.advantages[k];
    L.entropy += h;
    L.value += 0.5 * value_weight * err * err;
  }
  L.total = L.policy - entropy_weight * L.entropy + L.value;
  if (!std::isfinite(L.total)) throw NonFiniteLoss("batch loss is not finite");
  return L;
}

// ---------------------------------------------------------------------------
// Shared parameters

SharedParams::SharedParams(NetworkParams initial)
    : params_(std::move(initial)), m_(params_.size(), 0.0), v_(params_.size(), 0.0) {}

NetworkParams SharedParams::snapshot() const {
  NetworkParams copy = params_.zeros_like();
  auto& dst = copy.data();
  auto& src = const_cast<std::vector<double>&>(params_.data());
  for (size_t i = 0; i < dst.size(); ++i)
    dst[i] = std::atomic_ref<double>(src[i]).load(std::memory_order_relaxed);
  return copy;
}

double SharedParams::apply(const NetworkParams& grad, const TrainConfig& cfg) {
  if (grad.size() != params_.size()) throw ShapeMismatch("gradient does not match parameters");
  const auto& g = grad.data();
  double sq = 0.0;
  for (double x : g) sq += x * x;
  double norm = std::sqrt(sq);
  double scale = 1.0;
  if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
    scale = cfg.grad_clip / norm;
    norm = cfg.grad_clip;
  }
  const std::int64_t t = updates_.fetch_add(1) + 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
  double lr = cfg.learning_rate;
  if (cfg.anneal_learning_rate) {
    const double progress = static_cast<double>(global_step()) / static_cast<double>(cfg.max_global_steps);
    lr *= std::max(0.0, 1.0 - progress);
  }
  const double step = lr * std::sqrt(bc2) / bc1;
  auto& p = params_.data();
  for (size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] * scale;
    std::atomic_ref<double> mi(m_[i]), vi(v_[i]), pi(p[i]);
    const double m = b1 * mi.load(std::memory_order_relaxed) + (1.0 - b1) * gi;
    const double v = b2 * vi.load(std::memory_order_relaxed) + (1.0 - b2) * gi * gi;
    mi.store(m, std::memory_order_relaxed);
    vi.store(v, std::memory_order_relaxed);
    pi.store(pi.load(std::memory_order_relaxed) - step * m / (std::sqrt(v) + cfg.adam_eps),
             std::memory_order_relaxed);
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Agents and validation

void NetworkAgent::begin_episode(const Observation&, std::uint64_t episode_seed) {
  rec_ = RecurrentState::zeros(params_.config().lstm);
  rng_.seed(episode_seed);
}

Action NetworkAgent::act(const Observation& obs) {
  const PolicyOutput out = forward(params_, obs.rgb, rec_);
  rec_ = out.next;
  return greedy_ ? greedy_action(out) : sample_action(out, rng_);
}

ValidationResult validate(const SharedParams& shared, const EnvSetup& setup,
                          const EnvironmentPool& validation_pool, int episodes,
                          std::uint64_t seed) {
  NetworkAgent agent(shared.snapshot(), true);
  const EvalReport rep = evaluate(agent, setup, validation_pool, episodes, seed);
  return {shared.global_step(), rep.ar.mean, rep.el.mean};
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

struct TrainerShared {
  TrainerShared(const NetConfig& n, const TrainConfig& c, const TrainingData& d, NetworkParams init,
                std::ostream* l, std::string best, std::function<void(const std::string&)> prog)
      : net(n), cfg(c), data(d), params(std::move(init)), log(l), best_path(std::move(best)),
        progress(std::move(prog)), next_validation(c.validation_interval) {}

  const NetConfig& net;
  const TrainConfig& cfg;
  const TrainingData& data;
  SharedParams params;
  std::ostream* log;
  std::string best_path;
  std::function<void(const std::string&)> progress;

  std::mutex mu;  // guards everything below
  std::int64_t next_validation;
  TrainResult result;
  std::exception_ptr error;
  std::atomic<bool> stop{false};

  void write(const nlohmann::json& j) {
    if (log) *log << j.dump() << '\n';
  }
};

void maybe_validate(TrainerShared& S, std::int64_t global_step, bool force) {
  std::unique_lock lock(S.mu);
  if (!force && global_step < S.next_validation) return;
  while (S.next_validation <= global_step) S.next_validation += S.cfg.validation_interval;
  const EnvironmentPool& vpool = S.data.validation_pool ? *S.data.validation_pool : *S.data.pool;
  ValidationResult v = validate(S.params, S.data.env, vpool, S.cfg.validation_episodes,
                                S.cfg.seed ^ 0x5EEDULL);
  v.global_step = global_step;
  S.result.validations.push_back(v);
  const bool best = v.mean_ar > S.result.best_validation_ar;
  if (best) {
    S.result.best_validation_ar = v.mean_ar;
    S.result.best_params = S.params.snapshot();
    if (!S.best_path.empty()) save_checkpoint(S.result.best_params, S.best_path);
  }
  S.write({{"type", "validation"},
           {"global_step", global_step},
           {"mean_AR", v.mean_ar},
           {"mean_EL", v.mean_el},
           {"best_AR", S.result.best_validation_ar},
           {"improved", best}});
  if (S.progress) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "step %lld: validation AR %.1f EL %.1f (best %.1f)",
                  static_cast<long long>(global_step), v.mean_ar, v.mean_el,
                  S.result.best_validation_ar);
    S.progress(buf);
  }
}

void worker_loop(int id, TrainerShared& S) {
  const TrainConfig& cfg = S.cfg;
  const EnvSetup& es = S.data.env;
  std::mt19937_64 rng(episode_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(id)));
  TrackingEnv env(es.textures, es.camera, es.reward, es.episode, es.scale);
  const int texture_count = static_cast<int>(es.textures->size());

  std::optional<EpisodeLog> previous;
  auto start_episode = [&]() {
    const EpisodePlan plan =
        plan_episode(*S.data.pool, S.data.augment, texture_count, rng, previous ? &*previous : nullptr);
    return env.reset(plan.variant, plan.tracker_start);
  };
  Observation obs = start_episode();
  RecurrentState rec = RecurrentState::zeros(S.net.lstm);
  std::int64_t local_updates = 0;
  LossBreakdown loss_acc;

  std::vector<StepCache> caches;
  std::vector<Action> actions;
  std::vector<double> rewards, values;
  while (!S.stop.load()) {
    if (S.params.global_step() >= cfg.max_global_steps) break;
    const NetworkParams local = S.params.snapshot();
    caches.clear();
    actions.clear();
    rewards.clear();
    values.clear();
    bool done = false;
    std::int64_t global = 0;
    for (int t = 0; t < cfg.n_step; ++t) {
      const std::int64_t claimed = S.params.claim_step(cfg.max_global_steps);
      if (claimed == 0) break;
      global = claimed;
      caches.emplace_back();
      forward_cached(local, to_input(S.net, obs.rgb), rec, caches.back());
      const PolicyOutput& out = caches.back().out;
      const Action a = sample_action(out, rng);
      StepResult sr = env.step(a);
      actions.push_back(a);
      rewards.push_back(sr.reward * cfg.reward_scale);
      values.push_back(out.value);
      rec = out.next;
      obs = std::move(sr.observation);
      if (sr.done) {
        done = true;
        break;
      }
    }
    if (caches.empty()) break;
    const double bootstrap = done ? 0.0 : forward(local, obs.rgb, rec).value;
    const RolloutBatch batch = compute_returns_advantages(rewards, values, cfg.gamma, bootstrap);
    LossBreakdown loss;
    const NetworkParams grad = backward_from_cache(
        local, caches, actions, step_targets(batch, cfg.entropy_weight, cfg.value_weight), &loss);
    S.params.apply(grad, cfg);
    ++local_updates;
    loss_acc.policy += loss.policy;
    loss_acc.entropy += loss.entropy;
    loss_acc.value += loss.value;
    loss_acc.total += loss.total;

    if (local_updates % cfg.log_interval == 0) {
      const double n = cfg.log_interval;
      std::lock_guard lock(S.mu);
      S.write({{"type", "update"},
               {"global_step", global},
               {"worker", id},
               {"policy_loss", loss_acc.policy / n},
               {"entropy", loss_acc.entropy / n},
               {"value_loss", loss_acc.value / n},
               {"total_loss", loss_acc.total / n}});
      loss_acc = {};
    }
    if (done) {
      previous = env.log();
      {
        std::lock_guard lock(S.mu);
        ++S.result.episodes;
        S.write({{"type", "episode"},
                 {"global_step", global},
                 {"worker", id},
                 {"AR", previous->summary.accumulated_reward},
                 {"EL", previous->summary.episode_length},
                 {"flipped", previous->flipped}});
      }
      obs = start_episode();
      rec = RecurrentState::zeros(S.net.lstm);
    }
    maybe_validate(S, global, false);
  }
}

}  // namespace

TrainResult train(const NetConfig& net, const TrainConfig& cfg, const TrainingData& data,
                  std::ostream* log, const std::string& best_checkpoint_path,
                  std::function<void(const std::string&)> progress) {
  cfg.validate();
  net.validate();
  if (!data.pool || data.pool->empty()) throw ConfigError("training needs a nonempty env pool");
  if (!data.env.textures || data.env.textures->empty())
    throw EmptyTexturePool("training needs a texture pool");
  if (data.env.episode.action_space != net.action_space)
    throw ConfigError("episode action space differs from the network's");
  if (data.env.camera.width != net.in_width || data.env.camera.height != net.in_height)
    throw ConfigError("camera size differs from the network input size");

  const auto t0 = std::chrono::steady_clock::now();
  TrainerShared S(net, cfg, data, init_params(net, cfg.seed), log, best_checkpoint_path,
                  std::move(progress));
  S.write({{"schema", "activetrack.train_log"},
           {"version", 1},
           {"seed", cfg.seed},
           {"workers", cfg.worker_count},
           {"max_global_steps", cfg.max_global_steps},
           {"net", nlohmann::json::parse(net_config_to_json(net))}});

  auto run = [&S](int id) {
    try {
      worker_loop(id, S);
    } catch (...) {
      std::lock_guard lock(S.mu);
      if (!S.error) S.error = std::current_exception();
      S.stop.store(true);
    }
  };
  if (cfg.worker_count == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < cfg.worker_count; ++i) threads.emplace_back(run, i);
    for (auto& t : threads) t.join();
  }
  if (S.error) std::rethrow_exception(S.error);

  // Final validation so the last stretch of training is considered too.
  if (S.result.validations.empty() ||
      S.result.validations.back().global_step != S.params.global_step())
    maybe_validate(S, S.params.global_step(), true);

  TrainResult r = std::move(S.result);
  r.final_params = S.params.snapshot();
  r.global_steps = S.params.global_step();
  r.updates = S.params.updates();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) log->flush();
  return r;
}

}  // namespace activetrack
