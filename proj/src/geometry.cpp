#include "activetrack/geometry.hpp"

#include <algorithm>

namespace activetrack {

namespace {

// Earliest t in [0,1] with |p + t*delta - c| <= r.
std::optional<double> sweep_disc_against_point(Vec2 p, Vec2 delta, double r, Vec2 c) {
  const Vec2 m = p - c;
  const double a = dot(delta, delta);
  const double b = dot(m, delta);
  const double cc = dot(m, m) - r * r;
  if (cc <= 0.0) return 0.0;
  if (a == 0.0 || b >= 0.0) return std::nullopt;
  const double disc = b * b - a * cc;
  if (disc < 0.0) return std::nullopt;
  const double t = (-b - std::sqrt(disc)) / a;
  if (t < 0.0 || t > 1.0) return std::nullopt;
  return t;
}

}  // namespace

std::optional<double> sweep_disc_against_segment(Vec2 p, Vec2 delta, double radius,
                                                 const Segment& s) {
  if (distance_sq_to_segment(p, s) <= radius * radius) return 0.0;

  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && (!best || *t < *best)) best = t;
  };

  const Vec2 ab = s.b - s.a;
  const double len = norm(ab);
  if (len > 0.0) {
    // Distance to the supporting line, measured on the side the disc starts.
    const double c0 = cross(ab, p - s.a) / len;
    const double c1 = cross(ab, delta) / len;
    const double side = std::abs(c0);
    const double approach = c0 < 0.0 ? -c1 : c1;
    if (approach < 0.0 && side > radius) {
      const double t = (side - radius) / -approach;
      if (t <= 1.0) {
        const Vec2 q = p + t * delta;
        const double proj = dot(q - s.a, ab) / (len * len);
        if (proj >= 0.0 && proj <= 1.0) consider(t);
      }
    }
  }
  consider(sweep_disc_against_point(p, delta, radius, s.a));
  consider(sweep_disc_against_point(p, delta, radius, s.b));
  return best;
}

bool segments_intersect(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1) {
  auto orient = [](Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); };
  auto on_segment = [](Vec2 a, Vec2 b, Vec2 c) {
    return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= c.y && c.y <= std::max(a.y, b.y);
  };
  const double d1 = orient(q0, q1, p0);
  const double d2 = orient(q0, q1, p1);
  const double d3 = orient(p0, p1, q0);
  const double d4 = orient(p0, p1, q1);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(q0, q1, p0)) return true;
  if (d2 == 0 && on_segment(q0, q1, p1)) return true;
  if (d3 == 0 && on_segment(p0, p1, q0)) return true;
  if (d4 == 0 && on_segment(p0, p1, q1)) return true;
  return false;
}

}  // namespace activetrack
