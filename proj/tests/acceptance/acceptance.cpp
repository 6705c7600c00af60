// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   acceptance [--workdir DIR] [--only 1,2,5]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "activetrack/a3c.hpp"
#include "activetrack/actionmap.hpp"
#include "activetrack/augment.hpp"
#include "activetrack/baseline.hpp"
#include "activetrack/config.hpp"
#include "activetrack/errors.hpp"
#include "activetrack/evalkit.hpp"
#include "activetrack/scenario.hpp"
#include "activetrack/texture.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace activetrack;

namespace {

// Each pool-vs-single comparison trains both models for this many steps.
constexpr std::int64_t kComparisonBudget = 1'000'000;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t hash_logs(const std::vector<EpisodeLog>& logs) {
  std::ostringstream out;
  for (const auto& l : logs) write_episode_log(out, l);
  return fnv1a(out.str());
}

RunConfig desk(std::uint64_t seed) {
  RunConfig rc = preset_config(Preset::kDesk);
  rc.seed = seed;
  sync_derived(rc);
  rc.validate();
  return rc;
}

struct Trained {
  NetworkParams params;
  TrainResult result;
};

Trained train_desk(const RunConfig& rc, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  const TrainingData data = make_training_data(rc, load_textures(rc));
  TrainResult r = train(rc.net, rc.train, data, &log, (dir / "best.ckpt").string());
  NetworkParams best = r.best_params;
  return {std::move(best), std::move(r)};
}

// ---------------------------------------------------------------------------

Verdict gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  size_t failures = 0, blocks = 0;
  for (ActionSpace space : {ActionSpace::kDiscrete6, ActionSpace::kDiscrete9, ActionSpace::kContinuous2}) {
    const NetConfig c = oracle::tiny_config(space);
    std::mt19937_64 rng(101 + static_cast<int>(space));
    const NetworkParams p = oracle::random_params(c, rng);
    const auto rollout = oracle::random_rollout(c, 4, rng);
    RecurrentState rec = RecurrentState::zeros(c.lstm);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& v : rec.h) v = u(rng);
    for (auto& v : rec.c) v = u(rng);
    for (const auto& b : oracle::finite_difference_check(p, rollout, rec, 1e-4, 1e-3)) {
      ++blocks;
      failures += b.failures;
      worst = std::max(worst, b.worst_rel);
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 60.0,
          fmt("%zu blocks over 3 action spaces, %zu entries above 1e-3, worst rel %.2e, %.1f s",
              blocks, failures, worst, secs)};
}

Verdict returns_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-10.0, 10.0), g(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = len(rng);
    std::vector<double> rewards(n), values(n);
    for (auto& r : rewards) r = u(rng);
    for (auto& v : values) v = u(rng);
    const double gamma = g(rng), boot = (i % 5 == 0) ? 0.0 : u(rng);
    const RolloutBatch b = compute_returns_advantages(rewards, values, gamma, boot);
    const auto want = oracle::discounted_returns(rewards, gamma, boot);
    for (int k = 0; k < n; ++k) {
      worst = std::max(worst, std::abs(b.returns[k] - want[k]));
      worst = std::max(worst, std::abs(b.advantages[k] - (want[k] - values[k])));
    }
  }
  return {worst <= 1e-10, fmt("1000 sequences, max abs error %.2e", worst)};
}

Verdict reward_law() {
  const RewardParams p;  // A=1, d=2, c=2, lambda=0.5
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> ux(-8, 8), uy(-6, 10), uw(-std::numbers::pi, std::numbers::pi),
      grow(1.01, 3.0);
  int bad_bound = 0, bad_sym = 0, bad_mono = 0;
  for (int i = 0; i < 100000; ++i) {
    const RelativePose q{ux(rng), uy(rng), uw(rng)};
    const double r = compute_reward(q, p);
    if (!(r < p.A)) ++bad_bound;
    if (r != compute_reward({-q.x, q.y, q.omega}, p) || r != compute_reward({q.x, q.y, -q.omega}, p) ||
        r != compute_reward({-q.x, q.y, -q.omega}, p))
      ++bad_sym;
    // Farther from the desired spot along the same ray, and a larger heading error.
    const double s = grow(rng);
    const RelativePose far{q.x * s, p.d + (q.y - p.d) * s, q.omega};
    const RelativePose turned{q.x, q.y, std::copysign(std::min(std::abs(q.omega) * s + 1e-3, std::numbers::pi), q.omega)};
    if (!(compute_reward(far, p) < r) || !(compute_reward(turned, p) < r)) ++bad_mono;
  }
  const bool peak = compute_reward({0, p.d, 0}, p) == p.A;
  return {peak && bad_bound == 0 && bad_sym == 0 && bad_mono == 0,
          fmt("1e5 poses: peak %s, bound violations %d, symmetry %d, monotonicity %d",
              peak ? "exact" : "wrong", bad_bound, bad_sym, bad_mono)};
}

Verdict flip_equivariance() {
  const auto textures = std::make_shared<const TexturePool>(builtin_texture_pool());
  const auto& names = scenario_names();
  std::mt19937_64 rng(404);
  AugmentConfig aug;
  int mismatched_frames = 0, mismatched_rewards = 0, pairs = 0, steps = 0;
  while (pairs < 100) {
    WorldSpec w = make_scenario(names[rng() % names.size()]).spec;
    w = randomize_appearance(w, aug, textures->size(), rng);
    w = randomize_background(w, aug, rng);
    try {
      w = randomize_trajectory(w, aug, rng);
    } catch (const Error&) {
      continue;
    }
    CameraConfig cam;
    cam.width = 20 + static_cast<int>(rng() % 9);  // odd and even widths
    cam.height = 16 + static_cast<int>(rng() % 9);
    EpisodeConfig ep;
    ep.action_space = std::array{ActionSpace::kDiscrete6, ActionSpace::kDiscrete9,
                                 ActionSpace::kContinuous2}[rng() % 3];
    ep.max_steps = 60;
    ep.reward_threshold = std::numeric_limits<double>::lowest();
    TrackingEnv a(textures, cam, {}, ep), b(textures, cam, {}, ep);
    const Observation oa = a.reset(w);
    const Observation ob = b.reset(mirror_world(w));
    if (!(mirror_observation(oa) == ob)) ++mismatched_frames;
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int k = 0; k < ep.max_steps; ++k) {
      const Action act = ep.action_space == ActionSpace::kContinuous2
                             ? Action::continuous(u(rng), u(rng))
                             : Action::discrete(ep.action_space, static_cast<int>(rng() % action_count(ep.action_space)));
      const StepResult ra = a.step(act);
      const StepResult rb = b.step(flip_action(act));
      ++steps;
      if (!(mirror_observation(ra.observation) == rb.observation)) ++mismatched_frames;
      if (ra.reward != rb.reward) ++mismatched_rewards;
      if (ra.done) break;
    }
    ++pairs;
  }
  return {mismatched_frames == 0 && mismatched_rewards == 0,
          fmt("%d pairs, %d steps: %d frame mismatches, %d reward mismatches", pairs, steps,
              mismatched_frames, mismatched_rewards)};
}

struct DeskModel {
  RunConfig rc;
  NetworkParams params;
  double train_seconds = 0;
  double best_validation = 0;
  std::int64_t steps = 0;
};

Verdict desk_learning(const DeskModel& m) {
  const RunConfig& rc = m.rc;
  NetworkAgent agent(m.params, true);
  const EvalReport rep = evaluate(agent, make_env_setup(rc, load_textures(rc)), make_eval_pool(rc, false),
                                  10, rc.seed, rc.eval.lost_window);
  int full = 0;
  for (const auto& row : rep.rows) full += row.el == rc.episode.max_steps;
  const double need = 0.6 * rc.reward.A * rc.episode.max_steps;
  const bool ok = m.steps <= 2'000'000 && full >= 8 && rep.ar.mean >= need && m.train_seconds <= 4 * 3600.0;
  return {ok, fmt("%lld steps in %.0f s, full-length %d/10, AR %.1f +- %.1f (need >= %.0f), best validation %.1f",
                  static_cast<long long>(m.steps), m.train_seconds, full, rep.ar.mean, rep.ar.std, need,
                  m.best_validation)};
}

Verdict augmentation_effect(const fs::path& work) {
  const double margin = 0.2 * RewardParams{}.A * desk(0).episode.max_steps;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {11, 12, 13}) {
    RunConfig rc = desk(seed);
    rc.train.max_global_steps = kComparisonBudget;
    RunConfig single = rc;
    single.randomized_pool = false;
    const auto dir = work / ("augmentation_seed" + std::to_string(seed));
    const Trained pool_model = train_desk(rc, dir / "pool");
    const Trained single_model = train_desk(single, dir / "single");
    const EnvSetup setup = make_env_setup(rc, load_textures(rc));
    const EnvironmentPool held_out = make_eval_pool(rc, true);
    NetworkAgent pa(pool_model.params, true), sa(single_model.params, true);
    const double ar_pool = evaluate(pa, setup, held_out, 30, rc.seed, rc.eval.lost_window).ar.mean;
    const double ar_single = evaluate(sa, setup, held_out, 30, rc.seed, rc.eval.lost_window).ar.mean;
    const bool win = ar_pool - ar_single >= margin;
    wins += win;
    detail += fmt("seed %llu pool %.1f single %.1f%s; ", static_cast<unsigned long long>(seed), ar_pool,
                  ar_single, win ? " (win)" : "");
  }
  detail += fmt("margin %.0f, %d/3 seeds", margin, wins);
  return {wins >= 2, detail};
}

Verdict baseline_comparison(const DeskModel& m) {
  RunConfig rc = m.rc;
  rc.scenario = "sharp_turn";
  const EnvSetup setup = make_env_setup(rc, load_textures(rc));
  const EnvironmentPool pool = make_eval_pool(rc, false);
  NetworkAgent net(m.params, true);
  BaselineAgent base(rc.controller);
  const EvalReport rn = evaluate(net, setup, pool, 30, rc.seed, rc.eval.lost_window);
  const EvalReport rb = evaluate(base, setup, pool, 30, rc.seed, rc.eval.lost_window);
  return {rn.el.mean > rb.el.mean,
          fmt("sharp_turn EL network %.1f vs baseline %.1f (AR %.1f vs %.1f)", rn.el.mean, rb.el.mean,
              rn.ar.mean, rb.ar.mean)};
}

Verdict action_map() {
  const auto rows = fixture::action_tables();
  int checked = 0, bad = 0;
  for (const auto& r : rows) {
    std::vector<Action> acts;
    if (r.space == "discrete9") {
      for (int i = 0; i < 9; ++i)
        if (action_name(Action::discrete(ActionSpace::kDiscrete9, i)) == r.name)
          acts.push_back(Action::discrete(ActionSpace::kDiscrete9, i));
    } else if (r.name == "High") {
      acts.push_back(Action::continuous(1, 1));
    } else if (r.name == "Low") {
      acts.push_back(Action::continuous(-1, -1));
    }
    if (acts.size() != 1) {
      ++bad;
      continue;
    }
    ++checked;
    if (!(to_virtual(acts[0]) == VirtualVelocity{r.virt_linear, r.virt_angular}) ||
        !(to_real(acts[0]) == RealVelocity{r.real_linear, r.real_angular}))
      ++bad;
  }
  // Command stream timing, checked on the written text.
  std::mt19937_64 rng(808);
  std::vector<Action> seq;
  for (int i = 0; i < 500; ++i) seq.push_back(Action::discrete(ActionSpace::kDiscrete9, static_cast<int>(rng() % 9)));
  std::stringstream text;
  write_command_stream(text, command_stream(seq));
  std::string line;
  std::getline(text, line);
  std::getline(text, line);
  int ticks = 0, bad_ticks = 0;
  while (std::getline(text, line)) {
    const long long t = std::stoll(line.substr(0, line.find(',')));
    if (t != 50LL * ticks) ++bad_ticks;
    ++ticks;
  }
  return {bad == 0 && checked == 11 && ticks == 500 && bad_ticks == 0,
          fmt("%d table rows checked, %d mismatches; %d commands, %d off the 50 ms grid", checked, bad, ticks,
              bad_ticks)};
}

struct SaliencyOutcome {
  Verdict verdict;
  bool warn = false;
};

SaliencyOutcome saliency_concentration(const DeskModel& m) {
  const RunConfig& rc = m.rc;
  const EnvSetup setup = make_env_setup(rc, load_textures(rc));
  NetworkAgent agent(m.params, true);
  std::vector<EpisodeLog> logs;
  evaluate(agent, setup, make_eval_pool(rc, true), 5, rc.seed, rc.eval.lost_window, &logs);
  int visible = 0, dominated = 0;
  for (const auto& log : logs) {
    const auto frames = saliency_frames(m.params, log, setup, 1, static_cast<std::int64_t>(log.steps.size()));
    for (const auto& f : frames) {
      const auto box = target_bbox(f.view);
      if (!box) continue;
      const int x0 = static_cast<int>(std::lround(box->cx - (box->w - 1) / 2.0));
      const int y0 = static_cast<int>(std::lround(box->cy - (box->h - 1) / 2.0));
      double in = 0, out = 0;
      int n_in = 0, n_out = 0;
      for (int y = 0; y < f.view.height; ++y)
        for (int x = 0; x < f.view.width; ++x) {
          const double s = f.map[static_cast<size_t>(y) * f.view.width + x];
          if (x >= x0 && x < x0 + box->w && y >= y0 && y < y0 + box->h) {
            in += s;
            ++n_in;
          } else {
            out += s;
            ++n_out;
          }
        }
      ++visible;
      if (n_out == 0 || in / n_in > out / n_out) ++dominated;
    }
  }
  const double frac = visible ? static_cast<double>(dominated) / visible : 0.0;
  SaliencyOutcome o;
  o.verdict = {frac >= 0.55, fmt("inside > outside on %d/%d visible frames (%.1f%%)", dominated, visible, 100 * frac)};
  o.warn = frac < 0.70;
  return o;
}

Verdict determinism(const fs::path& work) {
  RunConfig rc = desk(5);
  rc.train.max_global_steps = 30'000;
  rc.train.validation_interval = 10'000;
  rc.train.validation_episodes = 2;
  rc.train.worker_count = 1;
  std::string logs[2];
  NetworkParams params[2];
  for (int i = 0; i < 2; ++i) {
    const TrainingData data = make_training_data(rc, load_textures(rc));
    std::ostringstream out;
    params[i] = train(rc.net, rc.train, data, &out).final_params;
    logs[i] = out.str();
  }
  const bool train_same = fnv1a(logs[0]) == fnv1a(logs[1]) && params[0] == params[1];

  const EnvSetup setup = make_env_setup(rc, load_textures(rc));
  const EnvironmentPool pool = make_eval_pool(rc, true);
  std::uint64_t eval_hash[2][2];
  for (int i = 0; i < 2; ++i) {
    NetworkAgent net(params[0], true);
    BaselineAgent base(rc.controller);
    std::vector<EpisodeLog> a, b;
    evaluate(net, setup, pool, 4, rc.seed, rc.eval.lost_window, &a);
    evaluate(base, setup, pool, 4, rc.seed, rc.eval.lost_window, &b);
    eval_hash[i][0] = hash_logs(a);
    eval_hash[i][1] = hash_logs(b);
  }
  const bool eval_same = eval_hash[0][0] == eval_hash[1][0] && eval_hash[0][1] == eval_hash[1][1];
  std::ofstream(work / "determinism_train_log.jsonl", std::ios::binary) << logs[0];
  return {train_same && eval_same,
          fmt("training log %016llx %s, network eval %016llx %s, baseline eval %016llx %s",
              static_cast<unsigned long long>(fnv1a(logs[0])), train_same ? "matches" : "DIFFERS",
              static_cast<unsigned long long>(eval_hash[0][0]), eval_hash[0][0] == eval_hash[1][0] ? "matches" : "DIFFERS",
              static_cast<unsigned long long>(eval_hash[0][1]), eval_hash[0][1] == eval_hash[1][1] ? "matches" : "DIFFERS")};
}

Verdict success_protocol() {
  const int W = kDefaultLostWindow;
  struct Case {
    int start, lost;
    bool success;
  };
  // Losses in the middle, touching the first step and touching the last step.
  std::vector<Case> cases;
  for (int start : {0, 200, 500 - W - 1}) {
    cases.push_back({start, W - 1, true});
    cases.push_back({start, W, false});
    cases.push_back({start, W + 1, false});
  }
  cases.push_back({500 - (W - 1), W - 1, true});
  int bad = 0;
  for (const auto& c : cases) {
    std::vector<bool> vis(500, true);
    for (int k = c.start; k < c.start + c.lost && k < 500; ++k) vis[k] = false;
    const SuccessResult r = classify_success(oracle::synthetic_log(vis, true), W);
    const bool at_ok = c.success ? !r.failed_at : (r.failed_at && *r.failed_at == c.start + W);
    if (r.success != c.success || !at_ok) ++bad;
  }
  // A truncated episode is never a success, however well it tracked.
  if (classify_success(oracle::synthetic_log(std::vector<bool>(500, true), false), W).success) ++bad;
  return {bad == 0, fmt("window %d steps, %zu boundary cases, %d wrong", W, cases.size() + 1, bad)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"activetrack acceptance checks"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Directory for training artifacts");
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int n) { return selected.empty() || selected.count(n); };
  const fs::path work(workdir);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int n, const char* title, const Verdict& v, bool warn = false) {
    std::printf("%s %2d %s: %s%s\n", v.pass ? "PASS" : "FAIL", n, title, v.detail.c_str(),
                warn ? " [WARN below 70%]" : "");
    std::fflush(stdout);
    failures += !v.pass;
  };
  auto guarded = [&](int n, const char* title, const std::function<Verdict()>& fn) {
    if (!want(n)) return;
    try {
      report(n, title, fn());
    } catch (const std::exception& e) {
      report(n, title, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded(1, "gradient check", gradients);
  guarded(2, "return oracle", returns_oracle);
  guarded(3, "reward law", reward_law);
  guarded(4, "flip equivariance", flip_equivariance);

  std::optional<DeskModel> model;
  if (want(5) || want(7) || want(9)) {
    try {
      const auto t0 = Clock::now();
      DeskModel m;
      m.rc = desk(0);
      const Trained t = train_desk(m.rc, work / "desk_pool");
      m.params = t.params;
      m.train_seconds = seconds_since(t0);
      m.best_validation = t.result.best_validation_ar;
      m.steps = t.result.global_steps;
      model = std::move(m);
    } catch (const std::exception& e) {
      for (int n : {5, 7, 9})
        if (want(n)) report(n, "desk model", {false, std::string("training threw: ") + e.what()});
    }
  }
  if (model) {
    guarded(5, "desk-scale learning", [&] { return desk_learning(*model); });
  }
  guarded(6, "augmentation effect", [&] { return augmentation_effect(work); });
  if (model) {
    guarded(7, "baseline comparison", [&] { return baseline_comparison(*model); });
  }
  guarded(8, "action map fidelity", action_map);
  if (model && want(9)) {
    try {
      const SaliencyOutcome o = saliency_concentration(*model);
      report(9, "saliency concentration", o.verdict, o.warn);
    } catch (const std::exception& e) {
      report(9, "saliency concentration", {false, std::string("threw: ") + e.what()});
    }
  }
  guarded(10, "determinism", [&] { return determinism(work); });
  guarded(11, "success protocol", success_protocol);
  return failures == 0 ? 0 : 1;
}
