#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace activetrack {

/// RGB raster with channel values in [0, 1]. Pixels equal to the colour key
/// (pure magenta) are transparent when the texture is drawn as a sprite.
struct Texture {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;  // row-major, 3 floats per pixel

  std::array<float, 3> at(int x, int y) const {
    const size_t i = 3 * (static_cast<size_t>(y) * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  bool transparent(int x, int y) const;
  std::array<float, 3> mean_color() const;
};

using TexturePool = std::vector<Texture>;

/// Texture ids used by the built-in pool.
namespace tex {
inline constexpr int kBrick = 0;
inline constexpr int kStone = 1;
inline constexpr int kWood = 2;
inline constexpr int kChecker = 3;
inline constexpr int kFloor = 4;
inline constexpr int kCeiling = 5;
inline constexpr int kMonster = 6;
inline constexpr int kCacodemon = 7;
inline constexpr int kZombie = 8;
inline constexpr int kFloorAlt = 9;
inline constexpr int kCeilingAlt = 10;
inline constexpr int kFirstRandom = 11;
}  // namespace tex

/// Deterministic procedural pool: structured wall/floor textures, three
/// sprite textures with odd widths, then `extra_random` noise textures.
TexturePool builtin_texture_pool(int extra_random = 8);

/// Binary PPM (P6, maxval <= 255) read/write.
Texture read_ppm(const std::string& path);
void write_ppm(const std::string& path, int width, int height, const std::vector<float>& rgb);
inline void write_ppm(const std::string& path, const Texture& t) {
  write_ppm(path, t.width, t.height, t.rgb);
}

/// Loads every *.ppm in a directory, sorted by file name.
TexturePool load_texture_pool(const std::string& directory);
void save_texture_pool(const TexturePool& pool, const std::string& directory);

}  // namespace activetrack
