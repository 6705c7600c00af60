#include "activetrack/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "activetrack/errors.hpp"

namespace activetrack {

void CameraConfig::validate() const {
  if (width < 8 || height < 8) throw InvalidWorld("camera must be at least 8x8 pixels");
  if (!(fov > 0.0 && fov < std::numbers::pi)) throw InvalidWorld("camera fov must be in (0, pi)");
  if (!(max_distance > 0.0)) throw InvalidWorld("camera max distance must be positive");
  if (!(eye_height > 0.0 && eye_height < wall_height))
    throw InvalidWorld("eye height must lie between floor and wall top");
}

namespace {

struct Sprite {
  Vec2 local;
  double half_width;
  const Texture* texture;
  bool mirrored;
  std::uint8_t id;
};

struct LocalWall {
  Vec2 a;
  Vec2 e;  // b - a
  double length;
  const Texture* texture;
};

const Texture& texture_or_throw(const TexturePool& pool, int id) {
  if (id < 0 || static_cast<size_t>(id) >= pool.size())
    throw InvalidWorld("texture id " + std::to_string(id) + " not in pool");
  return pool[id];
}

// Column index into a sprite texture. Computed from |offset| so that a
// mirrored world samples the mirrored texel bit-for-bit.
int sprite_column(double offset, double half_width, int tex_width, bool mirrored) {
  const int w = (tex_width % 2 == 1) ? tex_width : tex_width - 1;
  const int centre = (w - 1) / 2;
  const int m = static_cast<int>(std::floor(std::abs(offset) / (2.0 * half_width) * w + 0.5));
  int k = offset > 0.0 ? centre + m : (offset < 0.0 ? centre - m : centre);
  k = std::clamp(k, 0, w - 1);
  return mirrored ? w - 1 - k : k;
}

}  // namespace

Observation observe(const WorldSpec& spec, const WorldState& state, const CameraConfig& cam,
                    const TexturePool& textures) {
  const int W = cam.width, H = cam.height;
  Observation obs{W, H, std::vector<float>(static_cast<size_t>(W) * H * 3, 0.0f),
                  std::vector<std::uint8_t>(static_cast<size_t>(W) * H, kBackgroundId)};
  const Pose& eye = state.tracker;
  const double tan_half = std::tan(cam.fov / 2.0);
  const double focal = (W / 2.0) / tan_half;
  const double horizon = H / 2.0;
  const double light[3] = {spec.light.intensity * spec.light.tint[0],
                           spec.light.intensity * spec.light.tint[1],
                           spec.light.intensity * spec.light.tint[2]};
  auto shade = [&](double depth) { return 1.0 / (1.0 + cam.shading_k * depth); };

  const auto visible = spec.wall_visibility();
  std::vector<LocalWall> walls;
  for (size_t i = 0; i < spec.walls.size(); ++i) {
    if (!visible[i]) continue;
    const Vec2 a = to_local(eye, spec.walls[i].segment.a);
    const Vec2 b = to_local(eye, spec.walls[i].segment.b);
    walls.push_back({a, b - a, norm(b - a), &texture_or_throw(textures, spec.walls[i].texture)});
  }

  std::vector<Sprite> sprites;
  auto add_sprite = [&](const Pose& pose, double radius, int tex, bool mirrored, std::uint8_t id) {
    const Vec2 local = to_local(eye, pose.position());
    if (local.y <= 0.05 || local.y > cam.max_distance) return;
    sprites.push_back({local, radius, &texture_or_throw(textures, tex), mirrored, id});
  };
  add_sprite(state.target, spec.target.radius, spec.target.appearance,
             spec.target.appearance_mirrored, kTargetId);
  for (size_t i = 0; i < spec.distractors.size() && i < state.distractors.size(); ++i) {
    const auto& d = spec.distractors[i];
    const int id = std::min<int>(255, kFirstDistractorId + static_cast<int>(i));
    add_sprite(state.distractors[i], d.radius, d.appearance, d.appearance_mirrored,
               static_cast<std::uint8_t>(id));
  }

  const auto floor_col = texture_or_throw(textures, spec.floor_texture).mean_color();
  const auto ceil_col = texture_or_throw(textures, spec.ceiling_texture).mean_color();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> zbuf(static_cast<size_t>(H), inf);

  for (int col = 0; col < W; ++col) {
    const double t = static_cast<double>((2 * col + 1) - W) / W * tan_half;
    const Vec2 dir{t, 1.0};

    double depth = inf;
    const LocalWall* hit = nullptr;
    double hit_s = 0.0;
    for (const auto& w : walls) {
      const double denom = cross(dir, w.e);
      if (denom == 0.0) continue;
      const double lambda = cross(w.a, w.e) / denom;
      const double s = cross(w.a, dir) / denom;
      if (lambda > 1e-6 && s >= 0.0 && s <= 1.0 && lambda < depth) {
        depth = lambda;
        hit = &w;
        hit_s = s;
      }
    }
    if (depth > cam.max_distance) {
      depth = inf;
      hit = nullptr;
    }

    double top = horizon, bottom = horizon;
    if (hit) {
      top = horizon - focal * (cam.wall_height - cam.eye_height) / depth;
      bottom = horizon + focal * cam.eye_height / depth;
    }
    for (int row = 0; row < H; ++row) {
      const double rc = row + 0.5;
      double c[3];
      if (hit && rc >= top && rc < bottom) {
        const Texture& tx = *hit->texture;
        const double along = hit_s * hit->length / cam.wall_height;
        const double frac = along - std::floor(along);
        const int tu = std::min(tx.width - 1, static_cast<int>(frac * tx.width));
        const int tv = std::min(tx.height - 1,
                                static_cast<int>((rc - top) / (bottom - top) * tx.height));
        const auto texel = tx.at(tu, tv);
        const double s = shade(depth);
        for (int k = 0; k < 3; ++k) c[k] = texel[k] * light[k] * s;
      } else if (rc > horizon) {
        const double d = cam.eye_height * focal / (rc - horizon);
        const double s = shade(d);
        for (int k = 0; k < 3; ++k) c[k] = floor_col[k] * light[k] * s;
      } else if (rc < horizon) {
        const double d = (cam.wall_height - cam.eye_height) * focal / (horizon - rc);
        const double s = shade(d);
        for (int k = 0; k < 3; ++k) c[k] = ceil_col[k] * light[k] * s;
      } else {
        c[0] = c[1] = c[2] = 0.0;
      }
      float* px = &obs.rgb[3 * (static_cast<size_t>(row) * W + col)];
      for (int k = 0; k < 3; ++k) px[k] = static_cast<float>(std::clamp(c[k], 0.0, 1.0));
    }

    // Billboards: depth-tested against the wall column and each other.
    std::fill(zbuf.begin(), zbuf.end(), inf);
    for (const auto& sp : sprites) {
      const double y = sp.local.y;
      if (!(y < depth)) continue;
      const double offset = t * y - sp.local.x;
      if (std::abs(offset) > sp.half_width) continue;
      const double s_top = horizon - focal * (cam.sprite_height - cam.eye_height) / y;
      const double s_bottom = horizon + focal * cam.eye_height / y;
      const Texture& tx = *sp.texture;
      const int tu = sprite_column(offset, sp.half_width, tx.width, sp.mirrored);
      const double s = shade(y);
      const int r0 = std::max(0, static_cast<int>(std::floor(s_top - 0.5)));
      const int r1 = std::min(H - 1, static_cast<int>(std::ceil(s_bottom)));
      for (int row = r0; row <= r1; ++row) {
        const double rc = row + 0.5;
        if (rc < s_top || rc >= s_bottom || !(y < zbuf[row])) continue;
        const int tv =
            std::min(tx.height - 1, static_cast<int>((rc - s_top) / (s_bottom - s_top) * tx.height));
        if (tx.transparent(tu, tv)) continue;
        const auto texel = tx.at(tu, tv);
        zbuf[row] = y;
        float* px = &obs.rgb[3 * (static_cast<size_t>(row) * W + col)];
        for (int k = 0; k < 3; ++k)
          px[k] = static_cast<float>(std::clamp(texel[k] * light[k] * s, 0.0, 1.0));
        obs.ids[static_cast<size_t>(row) * W + col] = sp.id;
      }
    }
  }
  return obs;
}

Observation mirror_observation(const Observation& obs) {
  Observation m = obs;
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      const int mx = obs.width - 1 - x;
      const size_t src = static_cast<size_t>(y) * obs.width + x;
      const size_t dst = static_cast<size_t>(y) * obs.width + mx;
      m.ids[dst] = obs.ids[src];
      for (int k = 0; k < 3; ++k) m.rgb[3 * dst + k] = obs.rgb[3 * src + k];
    }
  }
  return m;
}

std::optional<BoundingBox> target_bbox(const Observation& obs, std::uint8_t id) {
  int x0 = obs.width, x1 = -1, y0 = obs.height, y1 = -1;
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      if (obs.id_at(x, y) != id) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  BoundingBox b;
  b.cx = (x0 + x1) / 2.0;
  b.cy = (y0 + y1) / 2.0;
  b.w = x1 - x0 + 1;
  b.h = y1 - y0 + 1;
  b.area_fraction = static_cast<double>(b.w) * b.h / (static_cast<double>(obs.width) * obs.height);
  return b;
}

void write_frame(const std::string& path, const Observation& obs) {
  write_ppm(path, obs.width, obs.height, obs.rgb);
}

}  // namespace activetrack
