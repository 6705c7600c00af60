// activetrack command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
// Every global flag can also be set through an ACTIVETRACK_<NAME> variable.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "activetrack/a3c.hpp"
#include "activetrack/actionmap.hpp"
#include "activetrack/baseline.hpp"
#include "activetrack/config.hpp"
#include "activetrack/errors.hpp"
#include "activetrack/evalkit.hpp"
#include "activetrack/render.hpp"

namespace fs = std::filesystem;
using namespace activetrack;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string scenario;
  std::optional<int> episodes;
  std::string checkpoint;
  // subcommand-specific
  bool single_env = false;
  bool perturbed = false;
  std::string log;
  std::string steps;
};

RunConfig resolve_config(const Options& o) {
  std::optional<Preset> preset;
  if (!o.preset.empty()) preset = preset_from_string(o.preset);
  RunConfig rc = o.config.empty() ? preset_config(preset.value_or(Preset::kDesk))
                                  : load_run_config(o.config, preset);
  if (o.seed) rc.seed = *o.seed;
  if (!o.out.empty()) rc.out = o.out;
  if (!o.scenario.empty()) rc.scenario = o.scenario;
  if (o.episodes) rc.eval.episodes = *o.episodes;
  if (o.single_env) rc.randomized_pool = false;
  sync_derived(rc);
  rc.validate();
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string need(const std::string& value, const char* flag, const char* cmd) {
  if (value.empty()) throw UsageError(std::string(cmd) + " needs " + flag);
  return value;
}

NetworkParams load_matching_checkpoint(const std::string& path, const RunConfig& rc) {
  NetworkParams p = load_checkpoint(path);
  const NetConfig& c = p.config();
  if (c.in_width != rc.camera.width || c.in_height != rc.camera.height)
    throw ConfigError("checkpoint expects " + std::to_string(c.in_width) + "x" +
                      std::to_string(c.in_height) + " input but the camera renders " +
                      std::to_string(rc.camera.width) + "x" + std::to_string(rc.camera.height));
  if (c.action_space != rc.episode.action_space)
    throw ConfigError("checkpoint action space differs from episode.action_space");
  return p;
}

int cmd_train(const Options& o) {
  const RunConfig rc = resolve_config(o);
  const auto textures = load_textures(rc);
  const TrainingData data = make_training_data(rc, textures);
  const fs::path out(rc.out);
  fs::create_directories(out);
  write_text(out / "config.json", run_config_to_json(rc) + "\n");
  std::ofstream log(out / "train_log.jsonl", std::ios::binary);
  const TrainResult r = train(rc.net, rc.train, data, &log, (out / "best.ckpt").string(),
                              [](const std::string& line) { std::cout << line << std::endl; });
  save_checkpoint(r.final_params, (out / "final.ckpt").string());
  save_checkpoint(r.best_params, (out / "best.ckpt").string());
  const json summary{{"schema", "activetrack.train_summary"},
                     {"version", 1},
                     {"global_steps", r.global_steps},
                     {"updates", r.updates},
                     {"episodes", r.episodes},
                     {"validations", r.validations.size()},
                     {"best_validation_ar", r.best_validation_ar},
                     {"seconds", r.seconds}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "trained " << r.global_steps << " steps in " << r.seconds
            << " s; best validation AR " << r.best_validation_ar << "\n";
  return 0;
}

int run_evaluation(const Options& o, bool baseline) {
  const RunConfig rc = resolve_config(o);
  const auto textures = load_textures(rc);
  const EnvSetup setup = make_env_setup(rc, textures);
  const EnvironmentPool pool = make_eval_pool(rc, o.perturbed);
  std::optional<NetworkAgent> net;
  std::optional<BaselineAgent> base;
  Agent* agent = nullptr;
  if (baseline) {
    agent = &base.emplace(rc.controller);
  } else {
    agent = &net.emplace(load_matching_checkpoint(need(o.checkpoint, "--checkpoint", "eval"), rc), true);
  }
  std::vector<EpisodeLog> logs;
  const EvalReport rep = evaluate(*agent, setup, pool, rc.eval.episodes, rc.seed, rc.eval.lost_window, &logs);

  const fs::path out(rc.out);
  fs::create_directories(out / "episodes");
  const std::string label = (baseline ? "baseline " : "network ") + rc.scenario +
                            (o.perturbed ? " perturbed" : "");
  std::ofstream txt(out / "report.txt", std::ios::binary);
  write_report_text(txt, rep, label);
  std::ofstream csv(out / "episodes.csv", std::ios::binary);
  write_report_csv(csv, rep);
  for (size_t i = 0; i < logs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "episode_%03zu.jsonl", i);
    save_episode_log(logs[i], (out / "episodes" / name).string());
  }
  std::printf("%s: AR %.2f +- %.2f, EL %.1f +- %.1f, success %.2f over %d episodes\n", label.c_str(),
              rep.ar.mean, rep.ar.std, rep.el.mean, rep.el.std, rep.success_rate, rep.episodes);
  return 0;
}

int cmd_replay(const Options& o) {
  const RunConfig rc = resolve_config(o);
  const EpisodeLog log = load_episode_log(need(o.log, "--log", "replay"));
  const auto frames = replay_frames(log, make_env_setup(rc, load_textures(rc)));
  const fs::path dir = fs::path(rc.out) / "frames";
  fs::create_directories(dir);
  for (size_t k = 0; k < frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.ppm", k);
    write_frame((dir / name).string(), frames[k]);
  }
  std::printf("wrote %zu frames to %s\n", frames.size(), dir.string().c_str());
  return 0;
}

std::pair<std::int64_t, std::int64_t> parse_steps(const std::string& text, std::int64_t n) {
  if (text.empty()) return {1, n};
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const std::int64_t k = std::stoll(text);
      return {k, k};
    }
    return {std::stoll(text.substr(0, colon)), std::stoll(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("--steps expects FIRST:LAST or a single step, got '" + text + "'");
  }
}

int cmd_saliency(const Options& o) {
  const RunConfig rc = resolve_config(o);
  const NetworkParams params =
      load_matching_checkpoint(need(o.checkpoint, "--checkpoint", "saliency"), rc);
  const EpisodeLog log = load_episode_log(need(o.log, "--log", "saliency"));
  const auto [first, last] = parse_steps(o.steps, static_cast<std::int64_t>(log.steps.size()));
  const auto frames = saliency_frames(params, log, make_env_setup(rc, load_textures(rc)), first, last);
  const fs::path dir = fs::path(rc.out) / "saliency";
  fs::create_directories(dir);
  for (const auto& f : frames) {
    char name[32];
    std::snprintf(name, sizeof name, "saliency_%05lld.ppm", static_cast<long long>(f.step));
    write_saliency_overlay((dir / name).string(), f);
  }
  std::printf("wrote %zu overlays to %s\n", frames.size(), dir.string().c_str());
  return 0;
}

int cmd_export_actions(const Options& o) {
  const RunConfig rc = resolve_config(o);
  const EpisodeLog log = load_episode_log(need(o.log, "--log", "export-actions"));
  std::vector<Action> actions;
  actions.reserve(log.steps.size());
  for (const auto& s : log.steps) actions.push_back(s.action);
  fs::create_directories(rc.out);
  const fs::path path = fs::path(rc.out) / "commands.csv";
  std::ofstream out(path, std::ios::binary);
  write_command_stream(out, command_stream(actions));
  std::printf("wrote %zu commands to %s\n", actions.size(), path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active object tracking lab"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  app.add_option("--config", o.config, "JSON run configuration")->envname("ACTIVETRACK_CONFIG");
  app.add_option("--preset", o.preset, "Base preset")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->envname("ACTIVETRACK_PRESET");
  app.add_option("--seed", o.seed, "Seed for training and evaluation")->envname("ACTIVETRACK_SEED");
  app.add_option("--out", o.out, "Output directory")->envname("ACTIVETRACK_OUT");
  app.add_option("--scenario", o.scenario, "Scenario name")->envname("ACTIVETRACK_SCENARIO");
  app.add_option("--episodes", o.episodes, "Evaluation episodes")
      ->check(CLI::PositiveNumber)
      ->envname("ACTIVETRACK_EPISODES");
  app.add_option("--checkpoint", o.checkpoint, "Network checkpoint")->envname("ACTIVETRACK_CHECKPOINT");

  auto* train = app.add_subcommand("train", "Train a tracker with A3C");
  train->add_flag("--single-env", o.single_env, "Train on the scenario start only");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a scenario");
  eval->add_flag("--perturbed-starts", o.perturbed, "Use held-out perturbed starts");
  auto* bench = app.add_subcommand("bench-baseline", "Evaluate the mean-shift baseline");
  bench->add_flag("--perturbed-starts", o.perturbed, "Use held-out perturbed starts");
  auto* replay = app.add_subcommand("replay", "Render an episode log to PPM frames");
  replay->add_option("--log", o.log, "Episode log")->required();
  auto* sal = app.add_subcommand("saliency", "Saliency overlays for a logged episode");
  sal->add_option("--log", o.log, "Episode log")->required();
  sal->add_option("--steps", o.steps, "FIRST:LAST, 1-based and inclusive (default: all)");
  auto* exp = app.add_subcommand("export-actions", "Robot command stream for a logged episode");
  exp->add_option("--log", o.log, "Episode log")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return run_evaluation(o, false);
    if (*bench) return run_evaluation(o, true);
    if (*replay) return cmd_replay(o);
    if (*sal) return cmd_saliency(o);
    if (*exp) return cmd_export_actions(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
