#include "activetrack/env.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "activetrack/errors.hpp"

namespace activetrack {

using nlohmann::json;

void RewardParams::validate() const {
  if (!(A > 0.0 && d > 0.0 && c > 0.0 && lambda > 0.0))
    throw ConfigError("reward parameters A, d, c, lambda must all be > 0");
}

double compute_reward(const RelativePose& rel, const RewardParams& p) {
  const double dist = std::sqrt(rel.x * rel.x + (rel.y - p.d) * (rel.y - p.d));
  return p.A - (dist / p.c + p.lambda * std::abs(rel.omega));
}

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!std::isfinite(reward_threshold)) throw ConfigError("reward_threshold must be finite");
}

std::string_view to_string(DoneReason r) {
  switch (r) {
    case DoneReason::kNone: return "none";
    case DoneReason::kThreshold: return "threshold";
    case DoneReason::kMaxSteps: return "max_steps";
  }
  return "none";
}

DoneReason done_reason_from_string(std::string_view s) {
  if (s == "none") return DoneReason::kNone;
  if (s == "threshold") return DoneReason::kThreshold;
  if (s == "max_steps") return DoneReason::kMaxSteps;
  throw FormatError("unknown done_reason '" + std::string(s) + "'");
}

std::uint64_t observation_hash(const Observation& obs) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(obs.rgb.data());
  for (size_t i = 0; i < obs.rgb.size() * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::optional<Pose> EpisodeLog::final_tracker_pose() const {
  if (steps.empty()) return std::nullopt;
  return steps.back().tracker;
}

TrackingEnv::TrackingEnv(std::shared_ptr<const TexturePool> textures, CameraConfig camera,
                         RewardParams reward, EpisodeConfig episode, MotionScale scale)
    : textures_(std::move(textures)),
      camera_(camera),
      reward_(reward),
      episode_(episode),
      scale_(scale) {
  if (!textures_ || textures_->empty()) throw EmptyTexturePool("env needs a texture pool");
  camera_.validate();
  reward_.validate();
  episode_.validate();
}

Observation TrackingEnv::reset(const EnvVariant& variant, std::optional<Pose> tracker_start) {
  if (!variant.spec) throw InvalidWorld("reset needs a world");
  flipped_ = variant.flipped;
  world_ = flipped_ ? mirror_world(*variant.spec) : *variant.spec;
  if (tracker_start && is_free(world_, tracker_start->position(), world_.tracker_radius)) {
    world_.tracker_start = *tracker_start;
  }
  validate(world_, static_cast<int>(textures_->size()));
  state_ = initial_state(world_);
  done_ = false;
  log_ = EpisodeLog{};
  log_.world = world_;
  log_.camera = camera_;
  log_.flipped = flipped_;
  log_.action_space = episode_.action_space;
  log_.max_steps = episode_.max_steps;
  log_.reward_threshold = episode_.reward_threshold;
  return render();
}

Observation TrackingEnv::render() const {
  Observation obs = observe(world_, state_, camera_, *textures_);
  return flipped_ ? mirror_observation(obs) : obs;
}

StepResult TrackingEnv::step(const Action& action) {
  if (done_) throw InvalidAction("step called on a finished episode; call reset first");
  if (action.space != episode_.action_space)
    throw InvalidAction("action space " + std::string(to_string(action.space)) +
                        " does not match env space " +
                        std::string(to_string(episode_.action_space)));
  try {
    check_action(action);
  } catch (const OutOfSpace& e) {
    throw InvalidAction(e.what());
  }
  const Action applied = flipped_ ? flip_action(action) : action;

  step_target(world_, state_);
  step_tracker(world_, state_, to_motion(applied, scale_));

  const Observation physical = observe(world_, state_, camera_, *textures_);
  StepResult r;
  r.info = relative_pose(state_.tracker, state_.target);
  r.reward = compute_reward(r.info, reward_);

  auto& summary = log_.summary;
  summary.accumulated_reward += r.reward;
  summary.episode_length = state_.step_count;
  if (summary.accumulated_reward < episode_.reward_threshold) {
    r.done_reason = DoneReason::kThreshold;
  } else if (state_.step_count >= episode_.max_steps) {
    r.done_reason = DoneReason::kMaxSteps;
  }
  r.done = r.done_reason != DoneReason::kNone;
  done_ = r.done;
  summary.done_reason = r.done_reason;

  log_.steps.push_back(StepRecord{state_.step_count, applied, r.reward, r.info,
                                  target_bbox(physical), state_.tracker, state_.target,
                                  observation_hash(physical)});
  r.observation = flipped_ ? mirror_observation(physical) : physical;
  return r;
}

// ---------------------------------------------------------------------------
// Log persistence

namespace {

json action_json(const Action& a) {
  if (a.is_discrete()) return {{"index", a.index}};
  return {{"linear", a.linear}, {"angular", a.angular}};
}

Action action_from(const json& j, ActionSpace space) {
  if (space == ActionSpace::kContinuous2)
    return Action::continuous(j.at("linear").get<double>(), j.at("angular").get<double>());
  return Action::discrete(space, j.at("index").get<int>());
}

json pose3(const Pose& p) { return json::array({p.x, p.y, p.heading}); }
Pose pose_from3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json camera_json(const CameraConfig& c) {
  return {{"width", c.width},           {"height", c.height},
          {"fov", c.fov},               {"max_distance", c.max_distance},
          {"eye_height", c.eye_height}, {"wall_height", c.wall_height},
          {"sprite_height", c.sprite_height}, {"shading_k", c.shading_k}};
}

CameraConfig camera_from(const json& j) {
  CameraConfig c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.fov = j.at("fov").get<double>();
  c.max_distance = j.at("max_distance").get<double>();
  c.eye_height = j.at("eye_height").get<double>();
  c.wall_height = j.at("wall_height").get<double>();
  c.sprite_height = j.at("sprite_height").get<double>();
  c.shading_k = j.at("shading_k").get<double>();
  return c;
}

}  // namespace

void write_episode_log(std::ostream& out, const EpisodeLog& log) {
  json header = {{"schema", "activetrack.episode_log"},
                 {"version", kEpisodeLogVersion},
                 {"flipped", log.flipped},
                 {"action_space", std::string(to_string(log.action_space))},
                 {"max_steps", log.max_steps},
                 {"reward_threshold", log.reward_threshold},
                 {"camera", camera_json(log.camera)},
                 {"map", json::parse(world_to_json(log.world))}};
  out << header.dump() << '\n';
  for (const auto& s : log.steps) {
    json line = {{"step", s.step},
                 {"action", action_json(s.action)},
                 {"reward", s.reward},
                 {"rel", json::array({s.rel.x, s.rel.y, s.rel.omega})},
                 {"tracker", pose3(s.tracker)},
                 {"target", pose3(s.target)},
                 {"obs_hash", s.obs_hash}};
    if (s.bbox) {
      line["bbox"] = {{"cx", s.bbox->cx}, {"cy", s.bbox->cy}, {"w", s.bbox->w},
                      {"h", s.bbox->h}, {"area_fraction", s.bbox->area_fraction}};
    } else {
      line["bbox"] = nullptr;
    }
    out << line.dump() << '\n';
  }
  json summary = {{"summary",
                   {{"AR", log.summary.accumulated_reward},
                    {"EL", log.summary.episode_length},
                    {"done_reason", std::string(to_string(log.summary.done_reason))}}}};
  out << summary.dump() << '\n';
}

EpisodeLog read_episode_log(std::istream& in) {
  EpisodeLog log;
  std::string line;
  try {
    if (!std::getline(in, line)) throw FormatError("empty episode log");
    const json header = json::parse(line);
    if (header.value("schema", "") != "activetrack.episode_log")
      throw FormatError("not an episode log");
    if (header.at("version").get<int>() != kEpisodeLogVersion)
      throw FormatError("unsupported episode log version");
    log.flipped = header.at("flipped").get<bool>();
    log.action_space = action_space_from_string(header.at("action_space").get<std::string>());
    log.max_steps = header.at("max_steps").get<int>();
    log.reward_threshold = header.at("reward_threshold").get<double>();
    log.camera = camera_from(header.at("camera"));
    log.world = world_from_json(header.at("map").dump());
    bool have_summary = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.contains("summary")) {
        const auto& s = j.at("summary");
        log.summary.accumulated_reward = s.at("AR").get<double>();
        log.summary.episode_length = s.at("EL").get<std::int64_t>();
        log.summary.done_reason = done_reason_from_string(s.at("done_reason").get<std::string>());
        have_summary = true;
        break;
      }
      StepRecord r;
      r.step = j.at("step").get<std::int64_t>();
      r.action = action_from(j.at("action"), log.action_space);
      r.reward = j.at("reward").get<double>();
      const auto& rel = j.at("rel");
      r.rel = {rel.at(0).get<double>(), rel.at(1).get<double>(), rel.at(2).get<double>()};
      r.tracker = pose_from3(j.at("tracker"));
      r.target = pose_from3(j.at("target"));
      r.obs_hash = j.at("obs_hash").get<std::uint64_t>();
      if (!j.at("bbox").is_null()) {
        const auto& b = j.at("bbox");
        r.bbox = BoundingBox{b.at("cx").get<double>(), b.at("cy").get<double>(),
                             b.at("w").get<int>(), b.at("h").get<int>(),
                             b.at("area_fraction").get<double>()};
      }
      log.steps.push_back(std::move(r));
    }
    if (!have_summary) throw FormatError("episode log has no summary line");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed episode log: ") + e.what());
  }
  return log;
}

void save_episode_log(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_episode_log(out, log);
}

EpisodeLog load_episode_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  return read_episode_log(in);
}

}  // namespace activetrack
