#pragma once

#include <optional>
#include <vector>

#include "activetrack/actionmap.hpp"
#include "activetrack/evalkit.hpp"
#include "activetrack/render.hpp"

namespace activetrack {

/// Axis-aligned window in pixel-index coordinates.
struct TrackWindow {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  friend bool operator==(const TrackWindow&, const TrackWindow&) = default;
};

struct MeanShiftConfig {
  int bins_per_channel = 8;
  int max_iterations = 20;
  double stop_shift = 1.0;       // pixels
  double lost_threshold = 0.05;  // minimum peak back-projection
  double scale_blend = 0.5;      // weight of the new size estimate per frame
};

/// Colour model of the tracked object. `histogram` sums to one; `ratio`
/// is the per-bin back-projection weight in [0, 1].
struct PassiveTrackerState {
  int bins = 8;
  std::vector<double> histogram;
  std::vector<double> ratio;
  TrackWindow window;
  bool initialized = false;
};

/// Builds the colour model from the box. Throws DegenerateBox when the box
/// is empty or leaves the frame.
PassiveTrackerState init_tracker(const Observation& frame, const TrackWindow& box,
                                 const MeanShiftConfig& cfg = {});
TrackWindow window_from_bbox(const BoundingBox& box);

struct TrackResult {
  std::optional<BoundingBox> bbox;  // absent when lost
  int iterations = 0;
  double peak_response = 0.0;
};

/// One mean-shift update on the back-projection of `frame`.
TrackResult track(PassiveTrackerState& state, const Observation& frame,
                  const MeanShiftConfig& cfg = {});

/// Proportional camera controller quantised to the six-action set. The turn
/// command k_turn * e fires outside a +/-dead_zone_px band; moving forward
/// fires while k_forward * (area_lo - a) > 0.
struct CameraController {
  double k_turn = 1.0;
  double k_forward = 1.0;
  double dead_zone_px = 0.0;  // <= 0: 8% of the frame width
  double area_lo = 0.015;
  double area_hi = 0.05;
  double reference_area = 0.03;

  void validate() const;
};

/// Horizontal error e = cx - (W-1)/2. When lost, turns toward the sign of
/// `last_error` (right when zero).
Action control(const std::optional<BoundingBox>& bbox, const CameraController& ctl, int width,
               int height, double last_error);

/// Mean-shift tracker plus controller, seeded with the ground-truth box of
/// the first frame.
class BaselineAgent : public Agent {
 public:
  explicit BaselineAgent(CameraController ctl = {}, MeanShiftConfig ms = {})
      : ctl_(ctl), ms_(ms) {}
  void begin_episode(const Observation& first, std::uint64_t episode_seed) override;
  Action act(const Observation& obs) override;

 private:
  CameraController ctl_;
  MeanShiftConfig ms_;
  PassiveTrackerState state_;
  double last_error_ = 0.0;
  bool active_ = false;
};

}  // namespace activetrack
