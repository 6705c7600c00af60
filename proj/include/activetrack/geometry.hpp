#pragma once

#include <cmath>
#include <numbers>
#include <optional>

namespace activetrack {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

/// Wraps an angle into (-pi, pi]. Odd-symmetric except at the +/-pi seam.
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

/// Unit forward vector for a heading. Heading pi maps to (-1, +0) so that a
/// world mirrored across the x axis sees exactly negated y components.
inline Vec2 heading_vector(double heading) {
  if (heading == std::numbers::pi) return {-1.0, 0.0};
  return {std::cos(heading), std::sin(heading)};
}

/// Planar pose. Heading 0 faces +x, positive headings turn counterclockwise.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Segment {
  Vec2 a;
  Vec2 b;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Point expressed in the tracker-centric frame: x to the right shoulder,
/// y straight ahead.
inline Vec2 to_local(const Pose& frame, Vec2 p) {
  const Vec2 fwd = heading_vector(frame.heading);
  const Vec2 right{fwd.y, -fwd.x};
  const Vec2 d = p - frame.position();
  return {d.x * right.x + d.y * right.y, d.x * fwd.x + d.y * fwd.y};
}

inline Vec2 to_world(const Pose& frame, Vec2 local) {
  const Vec2 fwd = heading_vector(frame.heading);
  const Vec2 right{fwd.y, -fwd.x};
  return frame.position() + local.x * right + local.y * fwd;
}

/// Squared distance from p to the closest point of segment s.
inline double distance_sq_to_segment(Vec2 p, const Segment& s) {
  const Vec2 ab = s.b - s.a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - s.a, ab) / len2 : 0.0;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  const Vec2 q = s.a + t * ab;
  return dot(p - q, p - q);
}

inline double distance_to_segment(Vec2 p, const Segment& s) {
  return std::sqrt(distance_sq_to_segment(p, s));
}

/// Smallest t in [0, 1] at which a disc of `radius` moving from `p` along
/// `delta` first touches segment `s`; nullopt if it never does.
std::optional<double> sweep_disc_against_segment(Vec2 p, Vec2 delta, double radius,
                                                 const Segment& s);

/// True when segments (p0,p1) and (q0,q1) intersect (touching counts).
bool segments_intersect(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1);

}  // namespace activetrack
