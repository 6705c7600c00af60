#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "activetrack/texture.hpp"
#include "activetrack/world.hpp"

namespace activetrack {

struct CameraConfig {
  int width = 84;
  int height = 84;
  double fov = 1.57;  // horizontal, radians
  double max_distance = 30.0;
  double eye_height = 0.5;
  double wall_height = 1.0;
  double sprite_height = 0.9;
  double shading_k = 0.15;  // brightness falls off as 1 / (1 + k * depth)

  void validate() const;
};

/// Entity ids written to the id buffer.
inline constexpr std::uint8_t kBackgroundId = 0;
inline constexpr std::uint8_t kTargetId = 1;
inline constexpr std::uint8_t kFirstDistractorId = 2;

struct Observation {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;        // HWC, values in [0, 1]
  std::vector<std::uint8_t> ids; // row-major entity ids

  float at(int x, int y, int c) const {
    return rgb[3 * (static_cast<size_t>(y) * width + x) + c];
  }
  std::uint8_t id_at(int x, int y) const { return ids[static_cast<size_t>(y) * width + x]; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Renders the tracker's first-person view. Pure function of its inputs.
Observation observe(const WorldSpec& spec, const WorldState& state, const CameraConfig& cam,
                    const TexturePool& textures);

/// Horizontal mirror of an observation (column x -> width-1-x).
Observation mirror_observation(const Observation& obs);

struct BoundingBox {
  double cx = 0.0;  // pixel index coordinates
  double cy = 0.0;
  int w = 0;
  int h = 0;
  double area_fraction = 0.0;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Tight box around pixels carrying `id`, or nullopt when there are none.
std::optional<BoundingBox> target_bbox(const Observation& obs, std::uint8_t id = kTargetId);

/// Writes the RGB frame as binary PPM.
void write_frame(const std::string& path, const Observation& obs);

}  // namespace activetrack
