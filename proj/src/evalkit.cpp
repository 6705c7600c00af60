#include "activetrack/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "activetrack/errors.hpp"
#include "activetrack/texture.hpp"

namespace activetrack {

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / values.size();
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / values.size())};
}

double center_deviation(const BoundingBox& box, int width) {
  return (box.cx - 0.5 * (width - 1)) / (0.5 * width);
}

namespace {

std::vector<LossInterval> loss_intervals(const EpisodeLog& log) {
  std::vector<LossInterval> out;
  std::optional<LossInterval> open;
  for (const auto& s : log.steps) {
    if (!s.bbox) {
      if (open) open->last = s.step;
      else open = LossInterval{s.step, s.step};
    } else if (open) {
      out.push_back(*open);
      open.reset();
    }
  }
  if (open) out.push_back(*open);
  return out;
}

}  // namespace

SuccessResult classify_success(const EpisodeLog& log, int lost_window) {
  if (lost_window < 1) throw ConfigError("lost_window must be >= 1");
  SuccessResult r;
  r.intervals = loss_intervals(log);
  for (const auto& iv : r.intervals) {
    if (iv.length() >= lost_window) {
      r.failed_at = iv.first + lost_window - 1;
      break;
    }
  }
  r.success = !r.failed_at && log.reached_max_steps();
  return r;
}

RecoveryStats recovery_stats(const std::vector<EpisodeLog>& logs, int lost_window) {
  RecoveryStats s;
  for (const auto& log : logs) {
    if (log.steps.empty()) continue;
    const std::int64_t final_step = log.steps.back().step;
    for (const auto& iv : loss_intervals(log)) {
      if (iv.length() < lost_window && iv.last < final_step) s.latencies.push_back(iv.length());
    }
  }
  std::sort(s.latencies.begin(), s.latencies.end());
  for (auto l : s.latencies) ++s.histogram[l];
  if (!s.latencies.empty()) {
    const size_t n = s.latencies.size();
    s.median = n % 2 ? static_cast<double>(s.latencies[n / 2])
                     : 0.5 * static_cast<double>(s.latencies[n / 2 - 1] + s.latencies[n / 2]);
  }
  return s;
}

EvalReport summarize(const std::vector<EpisodeLog>& logs, int lost_window) {
  EvalReport rep;
  rep.episodes = static_cast<int>(logs.size());
  std::vector<double> ar, el, sizes, devs;
  int successes = 0;
  for (size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    EpisodeRow row;
    row.episode = static_cast<int>(i);
    row.ar = log.summary.accumulated_reward;
    row.el = log.summary.episode_length;
    row.done_reason = log.summary.done_reason;
    row.flipped = log.flipped;
    const SuccessResult sr = classify_success(log, lost_window);
    row.success = sr.success;
    successes += sr.success ? 1 : 0;
    double size_sum = 0.0, dev_sum = 0.0;
    for (const auto& s : log.steps) {
      if (!s.bbox) continue;
      ++row.visible_steps;
      const double dev = center_deviation(*s.bbox, log.camera.width);
      size_sum += s.bbox->area_fraction;
      dev_sum += dev;
      sizes.push_back(s.bbox->area_fraction);
      devs.push_back(dev);
    }
    if (row.visible_steps > 0) {
      row.target_size_mean = size_sum / row.visible_steps;
      row.deviation_mean = dev_sum / row.visible_steps;
    }
    const std::int64_t final_step = log.steps.empty() ? 0 : log.steps.back().step;
    for (const auto& iv : sr.intervals) {
      RecoveryEvent ev{row.episode, iv.first, std::nullopt};
      if (iv.last < final_step) ev.reacquired_at = iv.last + 1;
      rep.recovery.push_back(ev);
    }
    ar.push_back(row.ar);
    el.push_back(static_cast<double>(row.el));
    rep.rows.push_back(row);
  }
  rep.ar = mean_std(ar);
  rep.el = mean_std(el);
  rep.target_size = mean_std(sizes);
  rep.deviation = mean_std(devs);
  rep.success_rate = logs.empty() ? 0.0 : static_cast<double>(successes) / logs.size();
  return rep;
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 of the pair keeps nearby seeds decorrelated.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EvalReport evaluate(Agent& agent, const EnvSetup& setup, const EnvironmentPool& pool, int episodes,
                    std::uint64_t seed, int lost_window, std::vector<EpisodeLog>* logs) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  TrackingEnv env(setup.textures, setup.camera, setup.reward, setup.episode, setup.scale);
  std::vector<EpisodeLog> done;
  done.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t es = episode_seed(seed, static_cast<std::uint64_t>(e));
    std::mt19937_64 rng(es);
    const EnvVariant& variant = sample_episode_env(pool, rng);
    Observation obs = env.reset(variant);
    agent.begin_episode(obs, es);
    while (!env.done()) obs = env.step(agent.act(obs)).observation;
    done.push_back(env.log());
  }
  EvalReport rep = summarize(done, lost_window);
  if (logs) *logs = std::move(done);
  return rep;
}

void write_report_text(std::ostream& out, const EvalReport& r, const std::string& label) {
  char buf[256];
  out << "# activetrack-eval v1\n";
  out << "label: " << label << '\n';
  out << "episodes: " << r.episodes << '\n';
  std::snprintf(buf, sizeof buf, "AR: %.4f +- %.4f\nEL: %.2f +- %.2f\nsuccess_rate: %.4f\n",
                r.ar.mean, r.ar.std, r.el.mean, r.el.std, r.success_rate);
  out << buf;
  std::snprintf(buf, sizeof buf, "target_size: %.5f +- %.5f\ndeviation: %.5f +- %.5f\n",
                r.target_size.mean, r.target_size.std, r.deviation.mean, r.deviation.std);
  out << buf;
  int reacquired = 0;
  for (const auto& ev : r.recovery) reacquired += ev.reacquired_at ? 1 : 0;
  out << "loss_events: " << r.recovery.size() << " (reacquired " << reacquired << ")\n";
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "episode,ar,el,done_reason,success,flipped,visible_steps,target_size_mean,deviation_mean\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%lld,%s,%d,%d,%d,%.6f,%.6f\n", row.episode, row.ar,
                  static_cast<long long>(row.el), std::string(to_string(row.done_reason)).c_str(),
                  row.success ? 1 : 0, row.flipped ? 1 : 0, row.visible_steps,
                  row.target_size_mean, row.deviation_mean);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Replay and saliency

std::vector<Observation> replay_frames(const EpisodeLog& log, const EnvSetup& setup) {
  EpisodeConfig ep = setup.episode;
  ep.max_steps = std::max<std::int64_t>(log.max_steps, static_cast<std::int64_t>(log.steps.size()));
  ep.reward_threshold = std::numeric_limits<double>::lowest();
  ep.action_space = log.action_space;
  TrackingEnv env(setup.textures, log.camera, setup.reward, ep, setup.scale);
  std::vector<Observation> frames;
  frames.reserve(log.steps.size() + 1);
  frames.push_back(env.reset(log.world));
  for (const StepRecord& rec : log.steps) {
    StepResult r = env.step(rec.action);
    if (observation_hash(r.observation) != rec.obs_hash)
      throw FormatError("replay diverged from the log at step " + std::to_string(rec.step));
    frames.push_back(std::move(r.observation));
  }
  return frames;
}

std::vector<SaliencyFrame> saliency_frames(const NetworkParams& params, const EpisodeLog& log,
                                           const EnvSetup& setup, std::int64_t first,
                                           std::int64_t last) {
  const auto n = static_cast<std::int64_t>(log.steps.size());
  if (first < 1 || last < first || last > n)
    throw ConfigError("step range " + std::to_string(first) + ".." + std::to_string(last) +
                      " is outside 1.." + std::to_string(n));
  std::vector<Observation> frames = replay_frames(log, setup);
  RecurrentState rec = RecurrentState::zeros(params.config().lstm);
  std::vector<SaliencyFrame> out;
  for (std::int64_t k = 1; k <= last; ++k) {
    Observation view = log.flipped ? mirror_observation(frames[k - 1]) : std::move(frames[k - 1]);
    const Action& logged = log.steps[k - 1].action;
    const Action action = log.flipped ? flip_action(logged) : logged;
    if (k >= first) out.push_back({k, view, action, saliency(params, view.rgb, rec, action)});
    rec = forward(params, view.rgb, rec).next;
  }
  return out;
}

void write_saliency_overlay(const std::string& path, const SaliencyFrame& f) {
  const Observation& o = f.view;
  std::vector<float> rgb(o.rgb.size());
  for (size_t p = 0; p < f.map.size(); ++p) {
    const float s = static_cast<float>(f.map[p]);
    for (int c = 0; c < 3; ++c) {
      const float base = 0.35f * o.rgb[3 * p + c];
      rgb[3 * p + c] = c == 0 ? std::min(1.0f, base + s) : base * (1.0f - s);
    }
  }
  write_ppm(path, o.width, o.height, rgb);
}

}  // namespace activetrack
