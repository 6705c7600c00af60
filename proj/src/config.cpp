#include "activetrack/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "activetrack/errors.hpp"
#include "activetrack/scenario.hpp"
#include "activetrack/texture.hpp"

namespace activetrack {

using nlohmann::json;

std::string_view to_string(Preset p) { return p == Preset::kPaper ? "paper" : "desk"; }

Preset preset_from_string(std::string_view s) {
  if (s == "paper") return Preset::kPaper;
  if (s == "desk") return Preset::kDesk;
  throw ConfigError("unknown preset '" + std::string(s) + "' (expected paper or desk)");
}

RunConfig preset_config(Preset preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == Preset::kPaper) {
    c.camera.width = c.camera.height = 84;
    c.episode.reward_threshold = -450.0;
    c.episode.max_steps = 3000;
    c.train.max_global_steps = 100'000'000;
    c.train.worker_count = 8;
    c.train.validation_interval = 1'000'000;
    c.eval.episodes = 100;
  } else {
    c.camera.width = c.camera.height = 32;
    c.net.lstm = 64;
    c.episode.reward_threshold = -75.0;
    c.episode.max_steps = 500;
    c.train.learning_rate = 5e-4;
    c.train.anneal_learning_rate = true;
    c.train.reward_scale = 0.1;
    c.train.max_global_steps = 2'000'000;
    c.train.validation_interval = 25'000;
    c.train.validation_episodes = 8;
    c.eval.episodes = 10;
  }
  c.net.in_width = c.camera.width;
  c.net.in_height = c.camera.height;
  return c;
}

void RunConfig::validate() const {
  camera.validate();
  reward.validate();
  episode.validate();
  augment.validate();
  train.validate();
  net.validate();
  controller.validate();
  if (net.in_width != camera.width || net.in_height != camera.height || net.in_channels != 3)
    throw ConfigError("network input must match the camera (width x height x 3)");
  if (net.action_space != episode.action_space)
    throw ConfigError("network and episode action spaces differ");
  if (eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (eval.lost_window < 1) throw ConfigError("eval.lost_window must be >= 1");
  make_scenario(scenario);  // throws for unknown names
}

// ---------------------------------------------------------------------------
// Field tables shared by reading and writing

namespace {

template <class V> void visit(V& v, ConvSpec& c) {
  v("filters", c.filters);
  v("kernel", c.kernel);
  v("stride", c.stride);
}

template <class V> void visit(V& v, CameraConfig& c) {
  v("width", c.width);
  v("height", c.height);
  v("fov", c.fov);
  v("max_distance", c.max_distance);
  v("eye_height", c.eye_height);
  v("wall_height", c.wall_height);
  v("sprite_height", c.sprite_height);
  v("shading_k", c.shading_k);
}

template <class V> void visit(V& v, RewardParams& r) {
  v("A", r.A);
  v("d", r.d);
  v("c", r.c);
  v("lambda", r.lambda);
}

template <class V> void visit(V& v, EpisodeConfig& e) {
  v("reward_threshold", e.reward_threshold);
  v("max_steps", e.max_steps);
  v("action_space", e.action_space);
}

template <class V> void visit(V& v, AugmentConfig& a) {
  v("n_perturb", a.n_perturb);
  v("enable_flip", a.enable_flip);
  v("perturb_x", a.perturb_x);
  v("perturb_y", a.perturb_y);
  v("perturb_omega", a.perturb_omega);
  v("hide_background_probability", a.hide_background_probability);
  v("resume_from_failure", a.resume_from_failure);
  v("randomize_appearance", a.randomize_appearance);
  v("texture_pool_path", a.texture_pool_path);
  v("light_intensity", a.light_intensity);
  v("tint", a.tint);
  v("resample_goals", a.resample_goals);
  v("goals_per_episode", a.goals_per_episode);
  v("speed", a.speed);
  v("zigzag_amplitude", a.zigzag_amplitude);
  v("zigzag_period", a.zigzag_period);
}

template <class V> void visit(V& v, TrainConfig& t) {
  v("learning_rate", t.learning_rate);
  v("anneal_learning_rate", t.anneal_learning_rate);
  v("entropy_weight", t.entropy_weight);
  v("gamma", t.gamma);
  v("n_step", t.n_step);
  v("worker_count", t.worker_count);
  v("max_global_steps", t.max_global_steps);
  v("validation_interval", t.validation_interval);
  v("validation_episodes", t.validation_episodes);
  v("value_weight", t.value_weight);
  v("reward_scale", t.reward_scale);
  v("grad_clip", t.grad_clip);
  v("adam_beta1", t.adam_beta1);
  v("adam_beta2", t.adam_beta2);
  v("adam_eps", t.adam_eps);
  v("log_interval", t.log_interval);
}

// Input size and action space follow the camera and episode blocks.
template <class V> void visit(V& v, NetConfig& n) {
  v("conv1", n.conv1);
  v("conv2", n.conv2);
  v("fc", n.fc);
  v("lstm", n.lstm);
}

template <class V> void visit(V& v, EvalSettings& e) {
  v("episodes", e.episodes);
  v("lost_window", e.lost_window);
}

template <class V> void visit(V& v, CameraController& c) {
  v("k_turn", c.k_turn);
  v("k_forward", c.k_forward);
  v("dead_zone_px", c.dead_zone_px);
  v("area_lo", c.area_lo);
  v("area_hi", c.area_hi);
  v("reference_area", c.reference_area);
}

template <class V> void visit(V& v, RunConfig& r) {
  v("scenario", r.scenario);
  v("seed", r.seed);
  v("out", r.out);
  v("pool_seed", r.pool_seed);
  v("randomized_pool", r.randomized_pool);
  v("camera", r.camera);
  v("reward", r.reward);
  v("episode", r.episode);
  v("augment", r.augment);
  v("train", r.train);
  v("net", r.net);
  v("eval", r.eval);
  v("controller", r.controller);
}

struct Reader {
  const json& j;
  std::string path;
  std::set<std::string> seen;

  std::string at(const std::string& key) const { return path.empty() ? key : path + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  static void read(const json& v, const std::string& where, double& out) {
    if (!v.is_number()) fail(where, "expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& where, int& out) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& where, std::int64_t& out) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    out = v.get<std::int64_t>();
  }
  static void read(const json& v, const std::string& where, std::uint64_t& out) {
    if (!v.is_number_unsigned()) fail(where, "expected a nonnegative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& where, bool& out) {
    if (!v.is_boolean()) fail(where, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& where, std::string& out) {
    if (!v.is_string()) fail(where, "expected a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& where, ActionSpace& out) {
    std::string s;
    read(v, where, s);
    try {
      out = action_space_from_string(s);
    } catch (const Error& e) {
      fail(where, e.what());
    }
  }
  static void read(const json& v, const std::string& where, Range& out) {
    if (!v.is_array() || v.size() != 2) fail(where, "expected [lo, hi]");
    read(v[0], where + "[0]", out.lo);
    read(v[1], where + "[1]", out.hi);
  }
  static void read(const json& v, const std::string& where, std::array<Range, 3>& out) {
    if (!v.is_array() || v.size() != 3) fail(where, "expected three [lo, hi] ranges");
    for (int i = 0; i < 3; ++i) read(v[i], where + "[" + std::to_string(i) + "]", out[i]);
  }
  static void read(const json& v, const std::string& where, std::array<int, 2>& out) {
    if (!v.is_array() || v.size() != 2) fail(where, "expected [lo, hi]");
    for (int i = 0; i < 2; ++i) read(v[i], where + "[" + std::to_string(i) + "]", out[i]);
  }
  template <class T>
  static void read(const json& v, const std::string& where, T& out)
    requires requires(Reader& r, T& t) { visit(r, t); }
  {
    if (!v.is_object()) fail(where, "expected an object");
    Reader sub{v, where, {}};
    visit(sub, out);
    sub.finish();
  }

  template <class T> void operator()(const char* key, T& field) {
    seen.insert(key);
    const auto it = j.find(key);
    if (it != j.end()) read(*it, at(key), field);
  }

  void finish() const {
    for (const auto& item : j.items())
      if (!seen.count(item.key())) fail(at(item.key()), "unknown key");
  }
};

struct Writer {
  json out = json::object();

  static json value(double v) { return v; }
  static json value(int v) { return v; }
  static json value(std::int64_t v) { return v; }
  static json value(std::uint64_t v) { return v; }
  static json value(bool v) { return v; }
  static json value(const std::string& v) { return v; }
  static json value(ActionSpace v) { return std::string(to_string(v)); }
  static json value(const Range& r) { return json::array({r.lo, r.hi}); }
  static json value(const std::array<Range, 3>& r) {
    return json::array({value(r[0]), value(r[1]), value(r[2])});
  }
  static json value(const std::array<int, 2>& r) { return json::array({r[0], r[1]}); }
  template <class T>
  static json value(T& v)
    requires requires(Writer& w, T& t) { visit(w, t); }
  {
    Writer sub;
    visit(sub, v);
    return sub.out;
  }

  template <class T> void operator()(const char* key, T& field) { out[key] = value(field); }
};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

RunConfig apply_parsed(RunConfig base, const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  Reader r{j, "", {"preset", "schema", "version"}};
  visit(r, base);
  r.finish();
  sync_derived(base);
  base.validate();
  return base;
}

}  // namespace

RunConfig apply_config_json(RunConfig base, const std::string& text) {
  return apply_parsed(std::move(base), parse_json(text));
}

RunConfig load_run_config(const std::string& path, std::optional<Preset> preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = parse_json(ss.str());
  if (!preset) {
    preset = Preset::kDesk;
    if (j.is_object() && j.contains("preset")) {
      std::string p;
      Reader::read(j.at("preset"), "preset", p);
      preset = preset_from_string(p);
    }
  }
  return apply_parsed(preset_config(*preset), j);
}

std::string run_config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Writer w;
  visit(w, copy);
  w.out["preset"] = std::string(to_string(cfg.preset));
  w.out["schema"] = "activetrack.run_config";
  w.out["version"] = 1;
  return w.out.dump(2);
}

void sync_derived(RunConfig& c) {
  c.net.in_width = c.camera.width;
  c.net.in_height = c.camera.height;
  c.net.in_channels = 3;
  c.net.action_space = c.episode.action_space;
  c.train.seed = c.seed;
  c.episode.seed = c.seed;
}

std::shared_ptr<const TexturePool> load_textures(const RunConfig& cfg) {
  if (cfg.augment.texture_pool_path.empty())
    return std::make_shared<const TexturePool>(builtin_texture_pool());
  return std::make_shared<const TexturePool>(load_texture_pool(cfg.augment.texture_pool_path));
}

EnvSetup make_env_setup(const RunConfig& cfg, std::shared_ptr<const TexturePool> textures) {
  return {std::move(textures), cfg.camera, cfg.reward, cfg.episode, {}};
}

TrainingData make_training_data(const RunConfig& cfg, std::shared_ptr<const TexturePool> textures) {
  const WorldSpec spec = make_scenario(cfg.scenario).spec;
  TrainingData d;
  d.env = make_env_setup(cfg, std::move(textures));
  d.augment = cfg.augment;
  if (cfg.randomized_pool) {
    d.pool = std::make_shared<const EnvironmentPool>(build_pool(spec, cfg.augment, cfg.pool_seed));
    d.validation_pool =
        std::make_shared<const EnvironmentPool>(build_pool(spec, cfg.augment, cfg.pool_seed + 1));
  } else {
    d.pool = std::make_shared<const EnvironmentPool>(single_env_pool(spec));
  }
  return d;
}

EnvironmentPool make_eval_pool(const RunConfig& cfg, bool perturbed_starts) {
  const WorldSpec spec = make_scenario(cfg.scenario).spec;
  return perturbed_starts ? build_pool(spec, cfg.augment, cfg.pool_seed + 2) : single_env_pool(spec);
}

}  // namespace activetrack
