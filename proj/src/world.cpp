#include "activetrack/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "activetrack/errors.hpp"

namespace activetrack {

using nlohmann::json;

std::vector<Segment> WorldSpec::wall_segments() const {
  std::vector<Segment> out;
  out.reserve(walls.size());
  for (const auto& w : walls) out.push_back(w.segment);
  return out;
}

std::vector<bool> WorldSpec::wall_visibility() const {
  std::vector<bool> vis(walls.size(), true);
  for (const auto& obj : background_objects) {
    if (obj.visible) continue;
    for (int i : obj.walls) {
      if (i >= 0 && static_cast<size_t>(i) < vis.size()) vis[i] = false;
    }
  }
  return vis;
}

RelativePose relative_pose(const Pose& tracker, const Pose& target) {
  const Vec2 local = to_local(tracker, target.position());
  return {local.x, local.y, normalize_angle(target.heading - tracker.heading)};
}

double wall_clearance(const WorldSpec& spec, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : spec.walls) best = std::min(best, distance_sq_to_segment(p, w.segment));
  return std::sqrt(best);
}

bool is_free(const WorldSpec& spec, Vec2 p, double radius) {
  return spec.bounds.contains(p, radius) && wall_clearance(spec, p) >= radius;
}

namespace {

bool finite_pose(const Pose& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.heading);
}

void check(bool ok, const std::string& what) {
  if (!ok) throw InvalidWorld(what);
}

void validate_trajectory(const TrajectoryScript& t, const std::string& who) {
  check(std::isfinite(t.speed) && t.speed >= 0.0, who + ": trajectory speed must be >= 0");
  check(std::isfinite(t.zigzag_amplitude), who + ": zigzag amplitude must be finite");
  check(t.zigzag_period >= 0, who + ": zigzag period must be >= 0");
}

}  // namespace

void validate(const WorldSpec& spec, int texture_count) {
  check(spec.map_version == kMapVersion, "unsupported map_version");
  check(spec.bounds.max.x > spec.bounds.min.x && spec.bounds.max.y > spec.bounds.min.y,
        "bounds must be a nonempty rectangle");
  auto tex_ok = [&](int id) { return id >= 0 && (texture_count <= 0 || id < texture_count); };
  for (size_t i = 0; i < spec.walls.size(); ++i) {
    const auto& w = spec.walls[i];
    check(spec.bounds.contains(w.segment.a) && spec.bounds.contains(w.segment.b),
          "wall " + std::to_string(i) + " lies outside bounds");
    check(tex_ok(w.texture), "wall " + std::to_string(i) + " has unknown texture");
  }
  check(tex_ok(spec.floor_texture) && tex_ok(spec.ceiling_texture),
        "floor/ceiling texture unknown");
  check(spec.light.intensity >= 0.0 && spec.light.intensity <= 1.0,
        "light intensity must be in [0,1]");
  for (double c : spec.light.tint) check(c >= 0.0 && c <= 1.0, "light tint must be in [0,1]");
  check(spec.tracker_radius > 0.0, "tracker radius must be positive");
  check(finite_pose(spec.tracker_start), "tracker start must be finite");
  check(is_free(spec, spec.tracker_start.position(), spec.tracker_radius),
        "tracker start collides with a wall or bounds");

  const auto& tg = spec.target;
  check(finite_pose(tg.initial), "target pose must be finite");
  check(tg.radius > 0.0, "target radius must be positive");
  check(tex_ok(tg.appearance), "target appearance unknown");
  check(is_free(spec, tg.initial.position(), tg.radius),
        "target initial pose collides with a wall or bounds");
  validate_trajectory(tg.trajectory, "target");
  if (!tg.trajectory.waypoints.empty()) {
    check(norm(tg.trajectory.waypoints.front() - tg.initial.position()) < 1e-9,
          "target trajectory must start at the target's initial position");
  }
  for (const auto& p : tg.trajectory.waypoints) {
    check(spec.bounds.contains(p, tg.radius), "target waypoint outside bounds");
  }
  for (size_t i = 0; i < spec.distractors.size(); ++i) {
    const auto& d = spec.distractors[i];
    const std::string who = "distractor " + std::to_string(i);
    check(finite_pose(d.initial), who + ": pose must be finite");
    check(d.radius > 0.0, who + ": radius must be positive");
    check(tex_ok(d.appearance), who + ": appearance unknown");
    check(spec.bounds.contains(d.initial.position()), who + ": outside bounds");
    validate_trajectory(d.trajectory, who);
  }
  for (const auto& obj : spec.background_objects) {
    for (int i : obj.walls) {
      check(i >= 0 && static_cast<size_t>(i) < spec.walls.size(),
            "background object references unknown wall");
    }
  }
}

WorldState initial_state(const WorldSpec& spec) {
  WorldState s;
  s.tracker = spec.tracker_start;
  s.tracker.heading = normalize_angle(s.tracker.heading);
  s.target = spec.target.initial;
  s.target.heading = normalize_angle(s.target.heading);
  s.target_progress = 0.0;
  for (const auto& d : spec.distractors) {
    Pose p = d.initial;
    p.heading = normalize_angle(p.heading);
    s.distractors.push_back(p);
    s.distractor_progress.push_back(0.0);
  }
  s.step_count = 0;
  return s;
}

namespace {

// Largest fraction of `delta` a disc can travel from `p` before contact.
double free_fraction(const WorldSpec& spec, Vec2 p, Vec2 delta, double radius) {
  const double len = norm(delta);
  if (len == 0.0) return 0.0;
  double t = 1.0;
  for (const auto& w : spec.walls) {
    if (auto hit = sweep_disc_against_segment(p, delta, radius, w.segment)) t = std::min(t, *hit);
  }
  // Bounds shrunk by the radius form a box the centre must stay inside.
  const Rect& b = spec.bounds;
  auto limit = [&](double pos, double d, double lo, double hi) {
    if (d > 0.0) t = std::min(t, std::max(0.0, (hi - pos) / d));
    if (d < 0.0) t = std::min(t, std::max(0.0, (lo - pos) / d));
  };
  limit(p.x, delta.x, b.min.x + radius, b.max.x - radius);
  limit(p.y, delta.y, b.min.y + radius, b.max.y - radius);
  if (t < 1.0) t = std::max(0.0, t - 1e-9 / len);
  return t;
}

struct Polyline {
  std::vector<Vec2> points;
  std::vector<double> cumulative;  // arc length at each point
};

Polyline make_polyline(const TrajectoryScript& traj) {
  Polyline pl;
  pl.points = traj.waypoints;
  if (traj.loop && pl.points.size() > 1 && !(pl.points.front() == pl.points.back())) {
    pl.points.push_back(pl.points.front());
  }
  pl.cumulative.resize(pl.points.size(), 0.0);
  for (size_t i = 1; i < pl.points.size(); ++i) {
    pl.cumulative[i] = pl.cumulative[i - 1] + norm(pl.points[i] - pl.points[i - 1]);
  }
  return pl;
}

}  // namespace

double trajectory_length(const TrajectoryScript& traj) {
  const Polyline pl = make_polyline(traj);
  return pl.cumulative.empty() ? 0.0 : pl.cumulative.back();
}

PathPoint trajectory_point(const TrajectoryScript& traj, double s) {
  const Polyline pl = make_polyline(traj);
  if (pl.points.empty()) return {};
  if (pl.points.size() == 1 || pl.cumulative.back() == 0.0) return {pl.points.front(), {1.0, 0.0}};
  const double total = pl.cumulative.back();
  if (traj.loop) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
  } else {
    s = std::clamp(s, 0.0, total);
  }
  size_t seg = 1;
  while (seg + 1 < pl.points.size() &&
         (pl.cumulative[seg] < s || pl.cumulative[seg] == pl.cumulative[seg - 1])) {
    ++seg;
  }
  const Vec2 a = pl.points[seg - 1];
  const Vec2 b = pl.points[seg];
  const double len = pl.cumulative[seg] - pl.cumulative[seg - 1];
  const Vec2 dir = len > 0.0 ? (1.0 / len) * (b - a) : Vec2{1.0, 0.0};
  const double along = std::clamp(s - pl.cumulative[seg - 1], 0.0, len);
  return {a + along * dir, dir};
}

double zigzag_offset(const TrajectoryScript& traj, std::int64_t step) {
  if (traj.zigzag_period <= 0 || traj.zigzag_amplitude == 0.0) return 0.0;
  // Reduce the phase first so step and step + period give identical values.
  const std::int64_t phase = step % traj.zigzag_period;
  return traj.zigzag_amplitude *
         std::sin(2.0 * std::numbers::pi * static_cast<double>(phase) / traj.zigzag_period);
}

namespace {

void advance_scripted(const WorldSpec& spec, const TrajectoryScript& traj, double radius,
                      std::int64_t step, Pose& pose, double& progress) {
  if (traj.waypoints.empty()) return;
  const double total = trajectory_length(traj);
  progress += traj.speed;
  if (!traj.loop) progress = std::min(progress, total);
  else if (total > 0.0) progress = std::fmod(progress, total);

  const PathPoint base = trajectory_point(traj, progress);
  const Vec2 left{-base.direction.y, base.direction.x};
  const Vec2 offset = zigzag_offset(traj, step) * left;
  double t = 1.0;
  if (!(offset == Vec2{})) t = free_fraction(spec, base.position, offset, radius);
  pose.x = base.position.x + t * offset.x;
  pose.y = base.position.y + t * offset.y;
  if (traj.waypoints.size() > 1 && traj.speed > 0.0) {
    pose.heading = normalize_angle(std::atan2(base.direction.y, base.direction.x));
  }
}

}  // namespace

void step_target(const WorldSpec& spec, WorldState& state) {
  const std::int64_t step = state.step_count + 1;
  advance_scripted(spec, spec.target.trajectory, spec.target.radius, step, state.target,
                   state.target_progress);
  for (size_t i = 0; i < spec.distractors.size() && i < state.distractors.size(); ++i) {
    const auto& d = spec.distractors[i];
    if (d.is_static) continue;
    advance_scripted(spec, d.trajectory, d.radius, step, state.distractors[i],
                     state.distractor_progress[i]);
  }
}

void step_tracker(const WorldSpec& spec, WorldState& state, TrackerMotion motion) {
  Pose& p = state.tracker;
  p.heading = normalize_angle(p.heading + motion.angular);
  if (motion.linear != 0.0) {
    const Vec2 delta = motion.linear * heading_vector(p.heading);
    const double t = free_fraction(spec, p.position(), delta, spec.tracker_radius);
    p.x += t * delta.x;
    p.y += t * delta.y;
  }
  ++state.step_count;
}

// ---------------------------------------------------------------------------
// Planning

namespace {

double segment_segment_distance(Vec2 a, Vec2 b, const Segment& s) {
  if (segments_intersect(a, b, s.a, s.b)) return 0.0;
  const Segment ab{a, b};
  return std::sqrt(std::min({distance_sq_to_segment(a, s), distance_sq_to_segment(b, s),
                             distance_sq_to_segment(s.a, ab), distance_sq_to_segment(s.b, ab)}));
}

}  // namespace

bool segment_clear(const WorldSpec& spec, Vec2 a, Vec2 b, double clearance) {
  if (!spec.bounds.contains(a, clearance) || !spec.bounds.contains(b, clearance)) return false;
  for (const auto& w : spec.walls) {
    if (segment_segment_distance(a, b, w.segment) < clearance) return false;
  }
  return true;
}

std::vector<Vec2> plan_path(const WorldSpec& spec, Vec2 start, Vec2 goal,
                            const PlannerOptions& options) {
  const double clearance = options.clearance < 0.0 ? spec.target.radius : options.clearance;
  const double cs = options.cell_size;
  if (!(cs > 0.0)) throw NoPath("planner cell size must be positive");
  if (!is_free(spec, goal, clearance)) throw NoPath("goal is not in free space");
  if (!is_free(spec, start, clearance)) throw NoPath("start is not in free space");
  if (segment_clear(spec, start, goal, clearance)) return {start, goal};

  const int nx = std::max(1, static_cast<int>(std::ceil(spec.bounds.width() / cs)));
  const int ny = std::max(1, static_cast<int>(std::ceil(spec.bounds.height() / cs)));
  auto center = [&](int i, int j) {
    return Vec2{spec.bounds.min.x + (i + 0.5) * cs, spec.bounds.min.y + (j + 0.5) * cs};
  };
  auto cell_of = [&](Vec2 p) {
    int i = std::clamp(static_cast<int>((p.x - spec.bounds.min.x) / cs), 0, nx - 1);
    int j = std::clamp(static_cast<int>((p.y - spec.bounds.min.y) / cs), 0, ny - 1);
    return std::pair{i, j};
  };
  // Inflate by 0.75 cells so straight moves between free centres keep clearance.
  const double inflate = clearance + 0.75 * cs;
  std::vector<char> free(static_cast<size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) free[j * nx + i] = is_free(spec, center(i, j), inflate) ? 1 : 0;

  const auto [si, sj] = cell_of(start);
  const auto [gi, gj] = cell_of(goal);
  const int s_idx = sj * nx + si;
  const int g_idx = gj * nx + gi;
  free[s_idx] = 1;
  free[g_idx] = 1;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(free.size(), inf);
  std::vector<int> parent(free.size(), -1);
  std::vector<char> closed(free.size(), 0);
  auto heuristic = [&](int i, int j) {
    const double dx = std::abs(i - gi), dy = std::abs(j - gj);
    return cs * (std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy));
  };
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[s_idx] = 0.0;
  open.push({heuristic(si, sj), s_idx});
  while (!open.empty()) {
    const int cur = open.top().second;
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (cur == g_idx) break;
    const int ci = cur % nx, cj = cur / nx;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int ni = ci + di, nj = cj + dj;
        if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
        const int n = nj * nx + ni;
        if (!free[n] || closed[n]) continue;
        if (di != 0 && dj != 0 && (!free[cj * nx + ni] || !free[nj * nx + ci])) continue;
        const double cost = g[cur] + cs * ((di != 0 && dj != 0) ? std::sqrt(2.0) : 1.0);
        if (cost < g[n]) {
          g[n] = cost;
          parent[n] = cur;
          open.push({cost + heuristic(ni, nj), n});
        }
      }
    }
  }
  if (!closed[g_idx]) throw NoPath("goal unreachable on the occupancy grid");

  std::vector<Vec2> raw;
  for (int c = g_idx; c != -1; c = parent[c]) raw.push_back(center(c % nx, c / nx));
  std::reverse(raw.begin(), raw.end());
  raw.insert(raw.begin(), start);
  raw.push_back(goal);

  // String pulling: jump to the farthest point still in clear line of sight.
  std::vector<Vec2> out{start};
  size_t i = 0;
  while (i + 1 < raw.size()) {
    size_t next = i;
    for (size_t j = raw.size() - 1; j > i; --j) {
      if (segment_clear(spec, raw[i], raw[j], clearance)) {
        next = j;
        break;
      }
    }
    if (next == i) throw NoPath("no clear segment along the grid path");
    out.push_back(raw[next]);
    i = next;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mirroring

Pose mirror_pose(const Pose& p) { return {p.x, -p.y, normalize_angle(-p.heading)}; }

namespace {

Vec2 mirror_point(Vec2 p) { return {p.x, -p.y}; }

TrajectoryScript mirror_trajectory(const TrajectoryScript& t) {
  TrajectoryScript m = t;
  for (auto& w : m.waypoints) w = mirror_point(w);
  m.zigzag_amplitude = -t.zigzag_amplitude;
  return m;
}

}  // namespace

WorldSpec mirror_world(const WorldSpec& spec) {
  WorldSpec m = spec;
  m.bounds = {{spec.bounds.min.x, -spec.bounds.max.y}, {spec.bounds.max.x, -spec.bounds.min.y}};
  for (auto& w : m.walls) w.segment = {mirror_point(w.segment.a), mirror_point(w.segment.b)};
  m.tracker_start = mirror_pose(spec.tracker_start);
  m.target.initial = mirror_pose(spec.target.initial);
  m.target.trajectory = mirror_trajectory(spec.target.trajectory);
  m.target.appearance_mirrored = !spec.target.appearance_mirrored;
  for (auto& d : m.distractors) {
    d.initial = mirror_pose(d.initial);
    d.trajectory = mirror_trajectory(d.trajectory);
    d.appearance_mirrored = !d.appearance_mirrored;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Map file

namespace {

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }
json pose_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

json traj_json(const TrajectoryScript& t) {
  json wp = json::array();
  for (auto p : t.waypoints) wp.push_back(vec_json(p));
  return {{"waypoints", wp},
          {"speed", t.speed},
          {"zigzag_amplitude", t.zigzag_amplitude},
          {"zigzag_period", t.zigzag_period},
          {"loop", t.loop}};
}

// Fetches a required key and reports the full key path on failure.
const json& req(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw FormatError("missing key " + path + "." + key);
  return j.at(key);
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw FormatError(path + " must be a number");
  return j.get<double>();
}

Vec2 vec_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw FormatError(path + " must be [x, y]");
  return {num(j[0], path + "[0]"), num(j[1], path + "[1]")};
}

Pose pose_from(const json& j, const std::string& path) {
  return {num(req(j, "x", path), path + ".x"), num(req(j, "y", path), path + ".y"),
          num(req(j, "heading", path), path + ".heading")};
}

TrajectoryScript traj_from(const json& j, const std::string& path) {
  TrajectoryScript t;
  const auto& wp = req(j, "waypoints", path);
  for (size_t i = 0; i < wp.size(); ++i)
    t.waypoints.push_back(vec_from(wp[i], path + ".waypoints[" + std::to_string(i) + "]"));
  t.speed = num(req(j, "speed", path), path + ".speed");
  t.zigzag_amplitude = num(req(j, "zigzag_amplitude", path), path + ".zigzag_amplitude");
  t.zigzag_period = req(j, "zigzag_period", path).get<int>();
  t.loop = req(j, "loop", path).get<bool>();
  return t;
}

}  // namespace

std::string world_to_json(const WorldSpec& spec) {
  json walls = json::array();
  for (const auto& w : spec.walls)
    walls.push_back({{"a", vec_json(w.segment.a)}, {"b", vec_json(w.segment.b)},
                     {"texture", w.texture}});
  json distractors = json::array();
  for (const auto& d : spec.distractors)
    distractors.push_back({{"initial", pose_json(d.initial)},
                           {"trajectory", traj_json(d.trajectory)},
                           {"appearance", d.appearance},
                           {"appearance_mirrored", d.appearance_mirrored},
                           {"static", d.is_static},
                           {"radius", d.radius}});
  json objects = json::array();
  for (const auto& o : spec.background_objects)
    objects.push_back({{"walls", o.walls}, {"visible", o.visible}});
  json j = {
      {"map_version", spec.map_version},
      {"bounds", {{"min", vec_json(spec.bounds.min)}, {"max", vec_json(spec.bounds.max)}}},
      {"walls", walls},
      {"floor_texture", spec.floor_texture},
      {"ceiling_texture", spec.ceiling_texture},
      {"light", {{"intensity", spec.light.intensity}, {"tint", spec.light.tint}}},
      {"tracker_start", pose_json(spec.tracker_start)},
      {"tracker_radius", spec.tracker_radius},
      {"target",
       {{"initial", pose_json(spec.target.initial)},
        {"trajectory", traj_json(spec.target.trajectory)},
        {"appearance", spec.target.appearance},
        {"appearance_mirrored", spec.target.appearance_mirrored},
        {"radius", spec.target.radius}}},
      {"distractors", distractors},
      {"background_objects", objects},
  };
  return j.dump(2);
}

WorldSpec world_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("map file is not valid JSON: ") + e.what());
  }
  try {
    WorldSpec s;
    s.map_version = req(j, "map_version", "map").get<int>();
    if (s.map_version != kMapVersion)
      throw FormatError("unsupported map_version " + std::to_string(s.map_version));
    const auto& b = req(j, "bounds", "map");
    s.bounds = {vec_from(req(b, "min", "map.bounds"), "map.bounds.min"),
                vec_from(req(b, "max", "map.bounds"), "map.bounds.max")};
    const auto& walls = req(j, "walls", "map");
    for (size_t i = 0; i < walls.size(); ++i) {
      const std::string p = "map.walls[" + std::to_string(i) + "]";
      s.walls.push_back({{vec_from(req(walls[i], "a", p), p + ".a"),
                          vec_from(req(walls[i], "b", p), p + ".b")},
                         req(walls[i], "texture", p).get<int>()});
    }
    s.floor_texture = req(j, "floor_texture", "map").get<int>();
    s.ceiling_texture = req(j, "ceiling_texture", "map").get<int>();
    const auto& light = req(j, "light", "map");
    s.light.intensity = num(req(light, "intensity", "map.light"), "map.light.intensity");
    s.light.tint = req(light, "tint", "map.light").get<std::array<double, 3>>();
    s.tracker_start = pose_from(req(j, "tracker_start", "map"), "map.tracker_start");
    s.tracker_radius = num(req(j, "tracker_radius", "map"), "map.tracker_radius");
    const auto& t = req(j, "target", "map");
    s.target.initial = pose_from(req(t, "initial", "map.target"), "map.target.initial");
    s.target.trajectory = traj_from(req(t, "trajectory", "map.target"), "map.target.trajectory");
    s.target.appearance = req(t, "appearance", "map.target").get<int>();
    s.target.appearance_mirrored = req(t, "appearance_mirrored", "map.target").get<bool>();
    s.target.radius = num(req(t, "radius", "map.target"), "map.target.radius");
    const auto& ds = req(j, "distractors", "map");
    for (size_t i = 0; i < ds.size(); ++i) {
      const std::string p = "map.distractors[" + std::to_string(i) + "]";
      Distractor d;
      d.initial = pose_from(req(ds[i], "initial", p), p + ".initial");
      d.trajectory = traj_from(req(ds[i], "trajectory", p), p + ".trajectory");
      d.appearance = req(ds[i], "appearance", p).get<int>();
      d.appearance_mirrored = req(ds[i], "appearance_mirrored", p).get<bool>();
      d.is_static = req(ds[i], "static", p).get<bool>();
      d.radius = num(req(ds[i], "radius", p), p + ".radius");
      s.distractors.push_back(std::move(d));
    }
    for (const auto& o : req(j, "background_objects", "map")) {
      s.background_objects.push_back(
          {o.at("walls").get<std::vector<int>>(), o.at("visible").get<bool>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed map file: ") + e.what());
  }
}

void save_world(const WorldSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write map file " + path);
  out << world_to_json(spec) << '\n';
}

WorldSpec load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read map file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return world_from_json(ss.str());
}

}  // namespace activetrack
