#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>

#include "activetrack/a3c.hpp"
#include "activetrack/actionmap.hpp"
#include "activetrack/baseline.hpp"
#include "activetrack/config.hpp"
#include "activetrack/env.hpp"
#include "activetrack/errors.hpp"
#include "activetrack/evalkit.hpp"
#include "activetrack/scenario.hpp"

namespace py = pybind11;
using namespace activetrack;

namespace {

py::array_t<float> image_array(const Observation& obs) {
  py::array_t<float> a({obs.height, obs.width, 3});
  std::copy(obs.rgb.begin(), obs.rgb.end(), a.mutable_data());
  return a;
}

Action make_action(ActionSpace space, const py::object& a) {
  if (space == ActionSpace::kContinuous2) {
    const auto pair = a.cast<std::pair<double, double>>();
    return Action::continuous(pair.first, pair.second);
  }
  return Action::discrete(space, a.cast<int>());
}

py::object action_object(const Action& a) {
  if (a.is_discrete()) return py::int_(a.index);
  return py::make_tuple(a.linear, a.angular);
}

py::dict pose_dict(const RelativePose& r) {
  py::dict d;
  d["x"] = r.x;
  d["y"] = r.y;
  d["omega"] = r.omega;
  return d;
}

py::dict report_dict(const EvalReport& rep) {
  py::dict d;
  d["episodes"] = rep.episodes;
  d["ar_mean"] = rep.ar.mean;
  d["ar_std"] = rep.ar.std;
  d["el_mean"] = rep.el.mean;
  d["el_std"] = rep.el.std;
  d["success_rate"] = rep.success_rate;
  d["target_size_mean"] = rep.target_size.mean;
  d["deviation_mean"] = rep.deviation.mean;
  py::list ars, els;
  for (const auto& row : rep.rows) {
    ars.append(row.ar);
    els.append(row.el);
  }
  d["ar"] = ars;
  d["el"] = els;
  return d;
}

RunConfig config_from(const std::string& preset, const std::string& overrides) {
  RunConfig rc = preset_config(preset_from_string(preset));
  if (!overrides.empty()) rc = apply_config_json(rc, overrides);
  sync_derived(rc);
  rc.validate();
  return rc;
}

// Gym-style wrapper over one scenario; perturbed starts come from the
// config's pool.
class PyEnv {
 public:
  PyEnv(const std::string& preset, const std::string& overrides, bool perturbed_starts)
      : rc_(config_from(preset, overrides)),
        env_(load_textures(rc_), rc_.camera, rc_.reward, rc_.episode),
        pool_(make_eval_pool(rc_, perturbed_starts)) {}

  py::array_t<float> reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return image_array(env_.reset(sample_episode_env(pool_, rng)));
  }

  py::tuple step(const py::object& action) {
    const StepResult r = env_.step(make_action(rc_.episode.action_space, action));
    py::dict info = pose_dict(r.info);
    info["done_reason"] = std::string(to_string(r.done_reason));
    return py::make_tuple(image_array(r.observation), r.reward, r.done, info);
  }

  py::dict relative_pose() const {
    return pose_dict(activetrack::relative_pose(env_.state().tracker, env_.state().target));
  }
  double accumulated_reward() const { return env_.accumulated_reward(); }
  bool done() const { return env_.done(); }
  int action_count() const { return activetrack::action_count(rc_.episode.action_space); }
  void save_log(const std::string& path) const { save_episode_log(env_.log(), path); }

 private:
  RunConfig rc_;
  TrackingEnv env_;
  EnvironmentPool pool_;
};

// Greedy or sampling policy from a checkpoint.
class PyPolicy {
 public:
  PyPolicy(const std::string& path, bool greedy) : agent_(load_checkpoint(path), greedy) { reset(0); }
  void reset(std::uint64_t seed) { agent_.begin_episode(Observation{}, seed); }
  py::object act(py::array_t<float, py::array::c_style | py::array::forcecast> image) {
    if (image.ndim() != 3 || image.shape(2) != 3) throw ShapeMismatch("expected an H x W x 3 image");
    Observation obs;
    obs.height = static_cast<int>(image.shape(0));
    obs.width = static_cast<int>(image.shape(1));
    obs.rgb.assign(image.data(), image.data() + image.size());
    return action_object(agent_.act(obs));
  }

 private:
  NetworkAgent agent_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Active object tracking lab: environment, training and evaluation.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("scenario_names", &scenario_names);
  m.def(
      "preset_config",
      [](const std::string& preset) { return run_config_to_json(preset_config(preset_from_string(preset))); },
      py::arg("preset") = "desk", "Preset as a JSON string.");
  m.def(
      "resolve_config",
      [](const std::string& preset, const std::string& overrides) {
        return run_config_to_json(config_from(preset, overrides));
      },
      py::arg("preset") = "desk", py::arg("overrides") = "",
      "Applies a JSON override document to a preset and validates it.");

  m.def(
      "compute_reward",
      [](double x, double y, double omega, double A, double d, double c, double lambda) {
        return compute_reward({x, y, omega}, {A, d, c, lambda});
      },
      py::arg("x"), py::arg("y"), py::arg("omega"), py::arg("A") = 1.0, py::arg("d") = 2.0,
      py::arg("c") = 2.0, py::arg("lam") = 0.5);

  m.def(
      "discounted_returns",
      [](const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
         double bootstrap) {
        const RolloutBatch b = compute_returns_advantages(rewards, values, gamma, bootstrap);
        return py::make_tuple(b.returns, b.advantages);
      },
      py::arg("rewards"), py::arg("values"), py::arg("gamma"), py::arg("bootstrap"),
      "n-step returns and advantages for one rollout.");

  m.def(
      "to_real",
      [](const std::string& space, const py::object& a) {
        const RealVelocity v = to_real(make_action(action_space_from_string(space), a));
        return py::make_tuple(v.linear, v.angular);
      },
      py::arg("space"), py::arg("action"));
  m.def(
      "to_virtual",
      [](const std::string& space, const py::object& a) {
        const VirtualVelocity v = to_virtual(make_action(action_space_from_string(space), a));
        return py::make_tuple(v.linear, v.angular);
      },
      py::arg("space"), py::arg("action"));
  m.def(
      "flip_action",
      [](const std::string& space, const py::object& a) {
        return action_object(flip_action(make_action(action_space_from_string(space), a)));
      },
      py::arg("space"), py::arg("action"));

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, const std::string&, bool>(), py::arg("preset") = "desk",
           py::arg("overrides") = "", py::arg("perturbed_starts") = false)
      .def("reset", &PyEnv::reset, py::arg("seed") = 0)
      .def("step", &PyEnv::step, py::arg("action"))
      .def("relative_pose", &PyEnv::relative_pose)
      .def("save_log", &PyEnv::save_log, py::arg("path"))
      .def_property_readonly("accumulated_reward", &PyEnv::accumulated_reward)
      .def_property_readonly("done", &PyEnv::done)
      .def_property_readonly("action_count", &PyEnv::action_count);

  py::class_<PyPolicy>(m, "Policy")
      .def(py::init<const std::string&, bool>(), py::arg("checkpoint"), py::arg("greedy") = true)
      .def("reset", &PyPolicy::reset, py::arg("seed") = 0)
      .def("act", &PyPolicy::act, py::arg("image"));

  m.def(
      "train",
      [](const std::string& preset, const std::string& overrides, const std::string& out_dir) {
        const RunConfig rc = config_from(preset, overrides);
        const TrainingData data = make_training_data(rc, load_textures(rc));
        std::unique_ptr<std::ofstream> log;
        std::string best;
        if (!out_dir.empty()) {
          log = std::make_unique<std::ofstream>(out_dir + "/train_log.jsonl", std::ios::binary);
          best = out_dir + "/best.ckpt";
        }
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(rc.net, rc.train, data, log.get(), best);
        }
        if (!out_dir.empty()) save_checkpoint(r.final_params, out_dir + "/final.ckpt");
        py::dict d;
        d["global_steps"] = r.global_steps;
        d["updates"] = r.updates;
        d["episodes"] = r.episodes;
        d["best_validation_ar"] = r.best_validation_ar;
        d["seconds"] = r.seconds;
        return d;
      },
      py::arg("preset") = "desk", py::arg("overrides") = "", py::arg("out_dir") = "",
      "Trains with A3C; writes train_log.jsonl, best.ckpt and final.ckpt when out_dir is set.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& preset, const std::string& overrides,
         bool perturbed_starts) {
        const RunConfig rc = config_from(preset, overrides);
        std::unique_ptr<Agent> agent;
        if (checkpoint.empty())
          agent = std::make_unique<BaselineAgent>(rc.controller);
        else
          agent = std::make_unique<NetworkAgent>(load_checkpoint(checkpoint), true);
        EvalReport rep;
        {
          py::gil_scoped_release release;
          rep = evaluate(*agent, make_env_setup(rc, load_textures(rc)),
                         make_eval_pool(rc, perturbed_starts), rc.eval.episodes, rc.seed,
                         rc.eval.lost_window);
        }
        return report_dict(rep);
      },
      py::arg("checkpoint") = "", py::arg("preset") = "desk", py::arg("overrides") = "",
      py::arg("perturbed_starts") = false,
      "Greedy evaluation of a checkpoint, or of the mean-shift baseline when none is given.");

  m.def(
      "classify_success",
      [](const std::string& log_path, int lost_window) {
        const SuccessResult s = classify_success(load_episode_log(log_path), lost_window);
        py::dict d;
        d["success"] = s.success;
        d["failed_at"] = s.failed_at ? py::object(py::int_(*s.failed_at)) : py::object(py::none());
        py::list runs;
        for (const auto& iv : s.intervals) runs.append(py::make_tuple(iv.first, iv.last));
        d["intervals"] = runs;
        return d;
      },
      py::arg("log_path"), py::arg("lost_window") = kDefaultLostWindow);
}
