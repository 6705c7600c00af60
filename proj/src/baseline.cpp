#include "activetrack/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "activetrack/errors.hpp"

namespace activetrack {

namespace {

int bin_of(const Observation& f, int x, int y, int bins) {
  auto q = [&](int c) {
    const int b = static_cast<int>(f.at(x, y, c) * bins);
    return std::clamp(b, 0, bins - 1);
  };
  return (q(0) * bins + q(1)) * bins + q(2);
}

struct PixelRect {
  int x0, y0, x1, y1;  // inclusive
};

PixelRect to_pixels(const TrackWindow& w, int width, int height) {
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::lround(w.cx - 0.5 * (w.w - 1))), 0, width - 1);
  r.y0 = std::clamp(static_cast<int>(std::lround(w.cy - 0.5 * (w.h - 1))), 0, height - 1);
  r.x1 = std::clamp(static_cast<int>(std::lround(w.cx + 0.5 * (w.w - 1))), 0, width - 1);
  r.y1 = std::clamp(static_cast<int>(std::lround(w.cy + 0.5 * (w.h - 1))), 0, height - 1);
  return r;
}

// Keeps the window inside the frame, shrinking it if it is larger.
TrackWindow clamp_window(TrackWindow w, int width, int height) {
  w.w = std::clamp(w.w, 1.0, static_cast<double>(width));
  w.h = std::clamp(w.h, 1.0, static_cast<double>(height));
  const double hx = 0.5 * (w.w - 1), hy = 0.5 * (w.h - 1);
  w.cx = std::clamp(w.cx, hx, width - 1 - hx);
  w.cy = std::clamp(w.cy, hy, height - 1 - hy);
  return w;
}

}  // namespace

TrackWindow window_from_bbox(const BoundingBox& b) {
  return {b.cx, b.cy, static_cast<double>(b.w), static_cast<double>(b.h)};
}

PassiveTrackerState init_tracker(const Observation& frame, const TrackWindow& box,
                                 const MeanShiftConfig& cfg) {
  if (!(box.w >= 1.0 && box.h >= 1.0)) throw DegenerateBox("tracker box has zero area");
  const double hx = 0.5 * (box.w - 1), hy = 0.5 * (box.h - 1);
  if (box.cx - hx < -0.5 || box.cy - hy < -0.5 || box.cx + hx > frame.width - 0.5 ||
      box.cy + hy > frame.height - 0.5)
    throw DegenerateBox("tracker box leaves the frame");
  const int bins = cfg.bins_per_channel;
  const size_t n = static_cast<size_t>(bins) * bins * bins;
  PassiveTrackerState s;
  s.bins = bins;
  s.histogram.assign(n, 0.0);
  std::vector<double> background(n, 0.0);
  const PixelRect r = to_pixels(box, frame.width, frame.height);
  double inside = 0.0, outside = 0.0;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const int b = bin_of(frame, x, y, bins);
      if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) {
        s.histogram[b] += 1.0;
        inside += 1.0;
      } else {
        background[b] += 1.0;
        outside += 1.0;
      }
    }
  }
  for (auto& v : s.histogram) v /= inside;
  if (outside > 0.0)
    for (auto& v : background) v /= outside;
  // Colours common in the surroundings get down-weighted.
  s.ratio.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double denom = s.histogram[i] + background[i];
    s.ratio[i] = denom > 0.0 ? s.histogram[i] / denom : 0.0;
  }
  s.window = box;
  s.initialized = true;
  return s;
}

TrackResult track(PassiveTrackerState& s, const Observation& frame, const MeanShiftConfig& cfg) {
  TrackResult res;
  if (!s.initialized) return res;
  const int W = frame.width, H = frame.height;
  std::vector<double> bp(static_cast<size_t>(W) * H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) bp[static_cast<size_t>(y) * W + x] = s.ratio[bin_of(frame, x, y, s.bins)];

  TrackWindow win = clamp_window(s.window, W, H);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    res.iterations = it + 1;
    const PixelRect r = to_pixels(win, W, H);
    double m = 0.0, mx = 0.0, my = 0.0;
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) {
        const double v = bp[static_cast<size_t>(y) * W + x];
        m += v;
        mx += v * x;
        my += v * y;
      }
    }
    if (m <= 0.0) break;
    const double nx = mx / m, ny = my / m;
    const double shift = std::hypot(nx - win.cx, ny - win.cy);
    win.cx = nx;
    win.cy = ny;
    win = clamp_window(win, W, H);
    if (shift < cfg.stop_shift) break;
  }

  // Scale and loss test over a search region twice the window size.
  TrackWindow search = clamp_window({win.cx, win.cy, 2 * win.w, 2 * win.h}, W, H);
  const PixelRect r = to_pixels(search, W, H);
  double peak = 0.0, mass = 0.0;
  for (int y = r.y0; y <= r.y1; ++y) {
    for (int x = r.x0; x <= r.x1; ++x) {
      const double v = bp[static_cast<size_t>(y) * W + x];
      peak = std::max(peak, v);
      mass += v;
    }
  }
  res.peak_response = peak;
  if (peak < cfg.lost_threshold || mass <= 0.0) {
    s.window = win;
    return res;
  }
  // Back-projection mass normalised by the peak approximates object area.
  const double aspect = win.w / win.h;
  const double area = std::max(1.0, mass / peak);
  const double nw = std::sqrt(area * aspect), nh = std::sqrt(area / aspect);
  win.w = (1 - cfg.scale_blend) * win.w + cfg.scale_blend * nw;
  win.h = (1 - cfg.scale_blend) * win.h + cfg.scale_blend * nh;
  win = clamp_window(win, W, H);
  s.window = win;

  const PixelRect out = to_pixels(win, W, H);
  BoundingBox b;
  b.w = out.x1 - out.x0 + 1;
  b.h = out.y1 - out.y0 + 1;
  b.cx = 0.5 * (out.x0 + out.x1);
  b.cy = 0.5 * (out.y0 + out.y1);
  b.area_fraction = static_cast<double>(b.w) * b.h / (static_cast<double>(W) * H);
  res.bbox = b;
  return res;
}

void CameraController::validate() const {
  if (k_turn < 0.0 || k_forward < 0.0) throw ConfigError("controller gains must be >= 0");
  if (!(area_lo < area_hi)) throw ConfigError("controller area band needs area_lo < area_hi");
}

Action control(const std::optional<BoundingBox>& bbox, const CameraController& ctl, int width,
               int /*height*/, double last_error) {
  using namespace d6;
  const auto A = [](int i) { return Action::discrete(ActionSpace::kDiscrete6, i); };
  if (!bbox) return A(last_error < 0.0 ? kTurnLeft : kTurnRight);
  const double dead = ctl.dead_zone_px > 0.0 ? ctl.dead_zone_px : 0.08 * width;
  const double e = bbox->cx - 0.5 * (width - 1);
  const double u = ctl.k_turn * e;
  const int turn = u > dead ? 1 : (u < -dead ? -1 : 0);  // +1 right, -1 left
  const bool forward = ctl.k_forward * (ctl.area_lo - bbox->area_fraction) > 0.0;
  if (turn == 0) return A(forward ? kForward : kNoOp);
  if (turn < 0) return A(forward ? kTurnLeftForward : kTurnLeft);
  return A(forward ? kTurnRightForward : kTurnRight);
}

void BaselineAgent::begin_episode(const Observation& first, std::uint64_t) {
  last_error_ = 0.0;
  active_ = false;
  state_ = {};
  if (const auto box = target_bbox(first)) {
    state_ = init_tracker(first, window_from_bbox(*box), ms_);
    active_ = true;
    last_error_ = box->cx - 0.5 * (first.width - 1);
  }
}

Action BaselineAgent::act(const Observation& obs) {
  std::optional<BoundingBox> box;
  if (active_) box = track(state_, obs, ms_).bbox;
  const Action a = control(box, ctl_, obs.width, obs.height, last_error_);
  if (box) last_error_ = box->cx - 0.5 * (obs.width - 1);
  return a;
}

}  // namespace activetrack
